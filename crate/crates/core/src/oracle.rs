//! Brute-force references: nested-loop evaluation and disjunctive-rule
//! model checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::qmodel::ConjunctiveQuery;
use crate::relcore::{Database, Relation, Schema, Tuple, Value};
use crate::varset::VarSet;

/// Largest body join the oracle will materialize.
pub const JOIN_GUARD: usize = 1_000_000;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub matches: bool,
    pub missing: Vec<Tuple>,
    pub extra: Vec<Tuple>,
}

impl OracleReport {
    fn from_lists(missing: Vec<Tuple>, extra: Vec<Tuple>) -> Self {
        OracleReport {
            matches: missing.is_empty() && extra.is_empty(),
            missing,
            extra,
        }
    }
}

/// Columns of an atom, positions already bound, and the atom's tuples keyed
/// by those positions.
type Step<'a> = (Vec<usize>, Vec<usize>, HashMap<Vec<Value>, Vec<&'a Tuple>>);

/// Every assignment of all query variables (in variable order) that
/// satisfies every atom, sorted.
pub fn body_join(q: &ConjunctiveQuery, db: &Database) -> Result<Vec<Tuple>> {
    let n = q.num_vars();
    let mut rels = Vec::new();
    for i in 0..q.atoms.len() {
        let r = q.atom_relation(db, i)?;
        let cols: Vec<usize> = r.vars().iter().map(|v| q.var_index(v).expect("atom variable")).collect();
        rels.push((cols, r));
    }
    // visit atoms so that each one shares variables with those before it
    let mut order: Vec<usize> = Vec::new();
    let mut bound = VarSet::EMPTY;
    let mut left: Vec<usize> = (0..rels.len()).collect();
    while !left.is_empty() {
        let pick = left
            .iter()
            .position(|&i| order.is_empty() || !q.atom_set(i).is_disjoint(bound))
            .unwrap_or(0);
        let i = left.remove(pick);
        bound = bound | q.atom_set(i);
        order.push(i);
    }
    let mut steps = Vec::new();
    let mut seen = VarSet::EMPTY;
    for &i in &order {
        let (cols, r) = &rels[i];
        let key_pos: Vec<usize> = (0..cols.len()).filter(|&p| seen.contains(cols[p])).collect();
        let mut index: HashMap<Vec<Value>, Vec<&Tuple>> = HashMap::new();
        for t in r.iter() {
            index.entry(key_pos.iter().map(|&p| t[p].clone()).collect()).or_default().push(t);
        }
        steps.push((cols.clone(), key_pos, index));
        seen = seen | q.atom_set(i);
    }
    let mut out = Vec::new();
    let mut cur: Vec<Option<Value>> = vec![None; n];
    fn go(
        depth: usize,
        steps: &[Step<'_>],
        cur: &mut Vec<Option<Value>>,
        out: &mut Vec<Tuple>,
    ) -> Result<()> {
        if depth == steps.len() {
            if out.len() >= JOIN_GUARD {
                return Err(Error::Guard(format!("body join exceeds {JOIN_GUARD} tuples")));
            }
            out.push(cur.iter().map(|v| v.clone().expect("all variables bound")).collect());
            return Ok(());
        }
        let (cols, key_pos, index) = &steps[depth];
        let key: Vec<Value> = key_pos.iter().map(|&p| cur[cols[p]].clone().unwrap()).collect();
        let Some(matches) = index.get(&key) else {
            return Ok(());
        };
        for t in matches {
            let mut bound_here = Vec::new();
            let mut ok = true;
            for (p, &c) in cols.iter().enumerate() {
                match &cur[c] {
                    Some(v) if *v != t[p] => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        cur[c] = Some(t[p].clone());
                        bound_here.push(c);
                    }
                }
            }
            if ok {
                go(depth + 1, steps, cur, out)?;
            }
            for c in bound_here {
                cur[c] = None;
            }
        }
        Ok(())
    }
    if steps.is_empty() {
        return Ok(out);
    }
    go(0, &steps, &mut cur, &mut out)?;
    out.sort();
    Ok(out)
}

fn project_rows(rows: &[Tuple], cols: &[usize]) -> BTreeSet<Tuple> {
    rows.iter().map(|t| cols.iter().map(|&c| t[c].clone()).collect()).collect()
}

/// `π_F(body join)` by definition.
pub fn brute_join(q: &ConjunctiveQuery, db: &Database) -> Result<Relation> {
    let rows = body_join(q, db)?;
    let cols: Vec<usize> = q.head.iter().map(|v| q.var_index(v).expect("head variable")).collect();
    Relation::from_tuples(Schema::new(q.head.clone())?, project_rows(&rows, &cols))
}

/// Compares two relations over the same variables.
pub fn compare(reference: &Relation, candidate: &Relation) -> Result<OracleReport> {
    let cand = candidate.reorder(reference.vars())?;
    let missing = reference.tuples().difference(cand.tuples()).cloned().collect();
    let extra = cand.tuples().difference(reference.tuples()).cloned().collect();
    Ok(OracleReport::from_lists(missing, extra))
}

fn bag_relation(q: &ConjunctiveQuery, bag: VarSet, rows: BTreeSet<Tuple>) -> Result<Relation> {
    Relation::from_tuples(Schema::new(q.vars_of(bag))?, rows)
}

/// Checks that every body tuple has its projection onto some head bag in
/// the candidate. `missing` lists the uncovered body tuples.
pub fn check_ddr_model(
    q: &ConjunctiveQuery,
    bags: &[VarSet],
    db: &Database,
    candidate: &BTreeMap<VarSet, Relation>,
) -> Result<OracleReport> {
    let rows = body_join(q, db)?;
    let mut sets = Vec::new();
    for b in bags {
        let cols: Vec<usize> = b.iter().collect();
        let have = match candidate.get(b) {
            Some(r) => r.reorder(&q.vars_of(*b))?.tuples().clone(),
            None => BTreeSet::new(),
        };
        sets.push((cols, have));
    }
    let missing = rows
        .into_iter()
        .filter(|t| {
            !sets
                .iter()
                .any(|(cols, have)| have.contains(&cols.iter().map(|&c| t[c].clone()).collect::<Tuple>()))
        })
        .collect();
    Ok(OracleReport::from_lists(missing, Vec::new()))
}

/// Scans body tuples in lexicographic order and inserts the projections of
/// each uncovered tuple into every head bag.
pub fn greedy_ddr_model(
    q: &ConjunctiveQuery,
    bags: &[VarSet],
    db: &Database,
) -> Result<BTreeMap<VarSet, Relation>> {
    let rows = body_join(q, db)?;
    let bags: Vec<VarSet> = bags.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let cols: Vec<Vec<usize>> = bags.iter().map(|b| b.iter().collect()).collect();
    let mut model: Vec<BTreeSet<Tuple>> = vec![BTreeSet::new(); bags.len()];
    for t in &rows {
        let projs: Vec<Tuple> = cols.iter().map(|c| c.iter().map(|&i| t[i].clone()).collect()).collect();
        if projs.iter().zip(&model).any(|(p, m)| m.contains(p)) {
            continue;
        }
        for (p, m) in projs.into_iter().zip(model.iter_mut()) {
            m.insert(p);
        }
    }
    bags.into_iter()
        .zip(model)
        .map(|(b, rows)| Ok((b, bag_relation(q, b, rows)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::parse_query;

    fn figure_two() -> Database {
        let mut db = Database::new();
        db.insert("R", Relation::from_rows("X,Y", &[&["1", "p"], &["1", "q"], &["2", "p"]]).unwrap());
        db.insert("S", Relation::from_rows("Y,Z", &[&["p", "3"], &["q", "4"], &["q", "5"]]).unwrap());
        db.insert("T", Relation::from_rows("Z,W", &[&["3", "i"], &["5", "i"], &["5", "j"]]).unwrap());
        db.insert("U", Relation::from_rows("W,X", &[&["i", "1"], &["j", "1"], &["k", "2"]]).unwrap());
        db
    }

    #[test]
    fn figure_two_outputs() {
        let db = figure_two();
        let full = parse_query("Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).").unwrap();
        let out = brute_join(&full, &db).unwrap();
        let expect = Relation::from_rows(
            "X,Y,Z,W",
            &[&["1", "p", "3", "i"], &["1", "q", "5", "i"], &["1", "q", "5", "j"]],
        )
        .unwrap();
        assert!(compare(&expect, &out).unwrap().matches);
        let proj = parse_query("Q(X,Y) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).").unwrap();
        let out = brute_join(&proj, &db).unwrap();
        let expect = Relation::from_rows("X,Y", &[&["1", "p"], &["1", "q"]]).unwrap();
        assert!(compare(&expect, &out).unwrap().matches);
    }

    #[test]
    fn greedy_model_is_a_model() {
        let db = figure_two();
        let q = parse_query("Q(X,Y) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).").unwrap();
        let bags = [VarSet::from_indices([0, 1, 2]), VarSet::from_indices([1, 2, 3])];
        let mut model = greedy_ddr_model(&q, &bags, &db).unwrap();
        assert!(model.values().all(|r| r.len() <= 3));
        assert!(check_ddr_model(&q, &bags, &db, &model).unwrap().matches);
        let first = model[&bags[0]].iter().next().unwrap().clone();
        let smaller: Vec<Tuple> = model[&bags[0]].iter().filter(|t| **t != first).cloned().collect();
        let schema = Schema::new(q.vars_of(bags[0])).unwrap();
        model.insert(bags[0], Relation::from_tuples(schema, smaller).unwrap());
        model.remove(&bags[1]);
        let rep = check_ddr_model(&q, &bags, &db, &model).unwrap();
        assert!(!rep.matches && !rep.missing.is_empty());
    }

    #[test]
    fn empty_database() {
        let q = parse_query("Q(X) :- R(X,Y), S(Y).").unwrap();
        let mut db = Database::new();
        db.insert("R", Relation::from_rows("A,B", &[]).unwrap());
        db.insert("S", Relation::from_rows("A", &[]).unwrap());
        assert!(brute_join(&q, &db).unwrap().is_empty());
        let bags = [VarSet::full(2)];
        assert!(check_ddr_model(&q, &bags, &db, &BTreeMap::new()).unwrap().matches);
    }
}
