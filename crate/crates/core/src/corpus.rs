//! Seeded random instances for cross-checking plans against the oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::qmodel::{parse_query, parse_stats, ConjunctiveQuery, StatisticsSet};
use crate::relcore::{Database, Relation, Schema, Value, Variable};

pub const SHAPES: [(&str, &str); 5] = [
    ("cycle4", "Q(X,Y) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X)."),
    ("triangle", "Q(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X)."),
    ("path5", "Q(A,B,C,D,E) :- R(A,B), S(B,C), T(C,D), U(D,E)."),
    ("cycle5", "Q(A,B,C,D,E) :- R(A,B), S(B,C), T(C,D), U(D,E), V(E,A)."),
    ("free5", "Q(A,C) :- R(A,B), S(B,C), T(C,D), U(D,E), V(E,A)."),
];

pub const MAX_DOMAIN: i64 = 8;
pub const MAX_TUPLES: usize = 40;

#[derive(Clone, Debug)]
pub struct Instance {
    pub shape: &'static str,
    pub seed: u64,
    pub query: ConjunctiveQuery,
    pub stats: StatisticsSet,
    pub db: Database,
}

/// `card(R) <= N` for every relation symbol.
pub fn card_stats(q: &ConjunctiveQuery) -> Result<StatisticsSet> {
    let text: String = std::iter::once("mode symbolic".to_string())
        .chain(q.symbols().iter().map(|s| format!("card({s}) <= N")))
        .collect::<Vec<_>>()
        .join("\n");
    parse_stats(&text, q)
}

/// Random relations over a small domain. Some relations get a hub value
/// so that degrees are skewed.
pub fn random_database(q: &ConjunctiveQuery, rng: &mut impl Rng) -> Result<Database> {
    let mut db = Database::new();
    for sym in q.symbols() {
        let atom = q.guard_atom(sym).expect("symbol has an atom");
        let arity = atom.vars.len();
        let domain = rng.gen_range(2..=MAX_DOMAIN);
        let count = rng.gen_range(0..=MAX_TUPLES);
        let hub = rng.gen_bool(0.3).then(|| rng.gen_range(0..arity));
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let row: Vec<Value> = (0..arity)
                .map(|c| {
                    if hub == Some(c) && rng.gen_bool(0.6) {
                        Value::Int(0)
                    } else {
                        Value::Int(rng.gen_range(0..domain))
                    }
                })
                .collect();
            rows.push(row);
        }
        db.insert(sym, Relation::from_tuples(Schema::new(atom.vars.clone())?, rows)?);
    }
    Ok(db)
}

/// The instance for `seed`; shapes rotate with the seed.
pub fn instance(seed: u64) -> Result<Instance> {
    let (shape, text) = SHAPES[(seed % SHAPES.len() as u64) as usize];
    let query = parse_query(text)?;
    let stats = card_stats(&query)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let db = random_database(&query, &mut rng)?;
    Ok(Instance {
        shape,
        seed,
        query,
        stats,
        db,
    })
}

/// A random tree-shaped query over at most six variables with a random
/// database.
pub fn acyclic_instance(seed: u64) -> Result<(ConjunctiveQuery, Database)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["A", "B", "C", "D", "E", "F"];
    let k = rng.gen_range(2..=6);
    let mut atoms = Vec::new();
    for v in 1..k {
        let parent = rng.gen_range(0..v);
        atoms.push(vec![names[parent], names[v]]);
    }
    if rng.gen_bool(0.5) {
        // a unary atom on a variable that already appears
        let i = rng.gen_range(0..atoms.len());
        atoms.push(vec![atoms[i][1]]);
    }
    let head: Vec<&str> = names[..k].iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    let body: Vec<String> = atoms
        .iter()
        .enumerate()
        .map(|(i, vs)| format!("R{i}({})", vs.join(",")))
        .collect();
    let q = parse_query(&format!("Q({}) :- {}.", head.join(","), body.join(", ")))?;
    let mut db = Database::new();
    for (i, vs) in atoms.iter().enumerate() {
        let count = rng.gen_range(0..20);
        let rows: Vec<Vec<Value>> = (0..count)
            .map(|_| vs.iter().map(|_| Value::Int(rng.gen_range(0..5))).collect())
            .collect();
        let schema = Schema::new(vs.iter().map(|v| Variable::new(v)).collect::<Result<_>>()?)?;
        db.insert(&format!("R{i}"), Relation::from_tuples(schema, rows)?);
    }
    Ok((q, db))
}
