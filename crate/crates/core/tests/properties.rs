use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use cqbound::corpus;
use cqbound::hypergraph::{self, Hypergraph};
use cqbound::infobound::{self, BoundContext, Extended};
use cqbound::oracle;
use cqbound::qmodel::{parse_query, parse_stats, ConjunctiveQuery, StatisticsSet};
use cqbound::ratlp::{LinearProgram, LpStatus, Sense};
use cqbound::relcore::{self, JoinTree, Relation, Schema, Value};
use cqbound::varset::VarSet;
use cqbound::Rational;

fn rat(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Solves the square system `m x = rhs`; `None` when singular.
fn solve_square(mut m: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = &m[r][col] / &m[col][col];
                let pivot = m[col].clone();
                for (v, p) in m[r].iter_mut().zip(&pivot).skip(col) {
                    *v -= &f * p;
                }
                let d = &f * &rhs[col];
                rhs[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &rhs[i] / &m[i][i]).collect())
}

/// Best objective over the vertices of `{x >= 0, a x <= b}` by trying every
/// choice of `n` tight rows. Only valid when the optimum is attained.
fn vertex_optimum(a: &[Vec<Rational>], b: &[Rational], c: &[Rational], maximize: bool) -> Option<Rational> {
    let n = c.len();
    let mut rows: Vec<(Vec<Rational>, Rational)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    for i in 0..n {
        let mut e = vec![rat(0); n];
        e[i] = rat(-1);
        rows.push((e, rat(0)));
    }
    let mut best: Option<Rational> = None;
    let total = rows.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let r = pick.iter().map(|&i| rows[i].1.clone()).collect();
        if let Some(x) = solve_square(m, r) {
            let feasible = rows.iter().all(|(row, rhs)| {
                let lhs: Rational = row.iter().zip(&x).map(|(p, q)| p * q).sum();
                lhs <= *rhs
            });
            if feasible {
                let v: Rational = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(match best {
                    None => v,
                    Some(b) if (v > b) == maximize && v != b => v,
                    Some(b) => b,
                });
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Queries over at most `max_vars` variables with distinct relation symbols
/// and no repeated variables inside an atom.
fn arb_query(max_vars: usize, max_atoms: usize) -> impl Strategy<Value = ConjunctiveQuery> {
    (
        prop::collection::vec(1u32..(1 << max_vars), 1..=max_atoms),
        any::<u32>(),
    )
        .prop_map(|(masks, head_mask)| {
            let names = ["A", "B", "C", "D", "E", "F"];
            let used: u32 = masks.iter().fold(0, |a, m| a | m);
            let atoms: Vec<String> = masks
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let vs: Vec<&str> = (0..6).filter(|b| m >> b & 1 == 1).map(|b| names[b]).collect();
                    format!("R{i}({})", vs.join(","))
                })
                .collect();
            let head: Vec<&str> = (0..6)
                .filter(|b| used >> b & 1 == 1 && head_mask >> b & 1 == 1)
                .map(|b| names[b])
                .collect();
            parse_query(&format!("Q({}) :- {}.", head.join(","), atoms.join(", "))).unwrap()
        })
}

fn card_stats(q: &ConjunctiveQuery) -> StatisticsSet {
    let lines: Vec<String> = q.symbols().iter().map(|s| format!("card({s}) <= N")).collect();
    parse_stats(&format!("mode symbolic\n{}", lines.join("\n")), q).unwrap()
}

fn finite(e: &Extended) -> Rational {
    match e {
        Extended::Finite(r) => r.clone(),
        Extended::Infinite => panic!("unbounded"),
    }
}

fn arb_relation(cols: &'static str, domain: i64) -> impl Strategy<Value = Relation> {
    let arity = cols.split(',').count();
    prop::collection::vec(prop::collection::vec(0..domain, arity), 0..25).prop_map(move |rows| {
        let schema = Schema::new(relcore::vars(cols)).unwrap();
        Relation::from_tuples(schema, rows.into_iter().map(|r| r.into_iter().map(Value::Int).collect())).unwrap()
    })
}

/// Running intersection for some tree on the edges, by trying every labelled
/// tree through its Prüfer code.
fn has_join_tree(edges: &[VarSet]) -> bool {
    let m = edges.len();
    if m <= 1 {
        return true;
    }
    let connected = |tree: &[(usize, usize)]| {
        let vars = edges.iter().fold(VarSet::EMPTY, |a, e| a | *e);
        vars.iter().all(|v| {
            let holders: Vec<usize> = (0..m).filter(|&i| edges[i].contains(v)).collect();
            let mut seen = BTreeSet::from([holders[0]]);
            let mut grew = true;
            while grew {
                grew = false;
                for &(a, b) in tree {
                    for (x, y) in [(a, b), (b, a)] {
                        if seen.contains(&x) && edges[y].contains(v) && seen.insert(y) {
                            grew = true;
                        }
                    }
                }
            }
            seen.len() == holders.len()
        })
    };
    let codes = m.pow(m as u32 - 2);
    (0..codes).any(|mut code| {
        let mut seq = Vec::new();
        for _ in 0..m - 2 {
            seq.push(code % m);
            code /= m;
        }
        let mut degree = vec![1; m];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut tree = Vec::new();
        for &s in &seq {
            let leaf = (0..m).find(|&i| degree[i] == 1).unwrap();
            tree.push((leaf, s));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..m).filter(|&i| degree[i] == 1).collect();
        tree.push((rest[0], rest[1]));
        connected(&tree)
    })
}

#[test]
fn yannakakis_matches_the_oracle_on_acyclic_instances() {
    for seed in 0..50 {
        let (q, db) = corpus::acyclic_instance(seed).unwrap();
        let (ok, tree) = hypergraph::gyo_acyclic(&Hypergraph::of_query(&q));
        assert!(ok, "{q}");
        let bags = (0..q.atoms.len()).map(|i| q.atom_relation(&db, i).unwrap()).collect();
        let jt = JoinTree {
            bags,
            edges: tree.unwrap(),
        };
        let got = relcore::yannakakis(&jt, &q.head).unwrap();
        let expect = oracle::brute_join(&q, &db).unwrap();
        assert!(oracle::compare(&expect, &got).unwrap().matches, "seed {seed}: {q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn join_commutes(r in arb_relation("A,B", 4), s in arb_relation("B,C", 4)) {
        let rs = relcore::join(&r, &s);
        let sr = relcore::join(&s, &r);
        prop_assert!(rs.reorder(sr.vars()).unwrap().same_as(&sr));
        let semi = relcore::semijoin(&r, &s);
        let proj = relcore::project(&rs, r.vars()).unwrap();
        prop_assert!(semi.same_as(&proj));
    }

    #[test]
    fn degree_partition_covers(r in arb_relation("A,B", 5), t in 0i64..6) {
        let ys = relcore::vars("B");
        let xs = relcore::vars("A");
        let (light, heavy) = relcore::partition_by_degree(&r, &ys, &xs, &rat(t)).unwrap();
        prop_assert_eq!(light.len() + heavy.len(), r.len());
        prop_assert!(light.tuples().is_disjoint(heavy.tuples()));
        prop_assert!(relcore::degree(&light, &ys, &xs).unwrap() as i64 <= t.max(0));
        if !heavy.is_empty() {
            prop_assert!(relcore::degree(&heavy, &ys, &xs).unwrap() as i64 > t);
        }
    }

    #[test]
    fn gyo_agrees_with_exhaustive_search(masks in prop::collection::vec(1u32..32, 1..=5)) {
        let edges: Vec<VarSet> = masks.into_iter().map(VarSet::from_bits).collect();
        prop_assert_eq!(hypergraph::is_acyclic(&edges), has_join_tree(&edges));
    }

    #[test]
    fn query_text_round_trips(q in arb_query(5, 4)) {
        let again = parse_query(&q.render()).unwrap();
        prop_assert_eq!(again, q);
    }

    #[test]
    fn simplex_matches_vertex_enumeration(
        n in 1usize..=3,
        rows in prop::collection::vec((prop::collection::vec(-3i64..=3, 3), 0i64..=6), 1..=3),
        obj in prop::collection::vec(-3i64..=3, 3),
    ) {
        let mut lp: LinearProgram<Rational> = LinearProgram::new(n);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (coeffs, rhs) in &rows {
            lp.add_constraint((0..n).map(|i| (i, rat(coeffs[i]))), Sense::Le, rat(*rhs));
            a.push((0..n).map(|i| rat(coeffs[i])).collect::<Vec<_>>());
            b.push(rat(*rhs));
        }
        for i in 0..n {
            lp.add_constraint([(i, rat(1))], Sense::Le, rat(4));
            let mut e = vec![rat(0); n];
            e[i] = rat(1);
            a.push(e);
            b.push(rat(4));
        }
        let c: Vec<Rational> = obj[..n].iter().map(|&v| rat(v)).collect();
        for (i, v) in c.iter().enumerate() {
            lp.set_objective(i, v.clone());
        }
        let sol = lp.solve();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(sol.certify(&lp).is_ok());
        prop_assert_eq!(Some(sol.value), vertex_optimum(&a, &b, &c, true));
    }

    #[test]
    fn cardinality_bound_is_the_edge_cover_number(q in arb_query(4, 4)) {
        let ctx = BoundContext::new(&q, &card_stats(&q)).unwrap();
        let got = finite(&infobound::polymatroid_bound(&ctx, q.all_set()).unwrap().value);
        let m = q.atoms.len();
        let a: Vec<Vec<Rational>> = (0..q.num_vars())
            .map(|v| (0..m).map(|e| if q.atom_set(e).contains(v) { rat(-1) } else { rat(0) }).collect())
            .collect();
        let b = vec![rat(-1); q.num_vars()];
        let c = vec![rat(1); m];
        prop_assert_eq!(Some(got), vertex_optimum(&a, &b, &c, false));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tighter_statistics_never_raise_bounds(q in arb_query(4, 3), which in 0usize..3) {
        let base = card_stats(&q);
        let ctx = BoundContext::new(&q, &base).unwrap();
        let target = q.free_set() | VarSet::singleton(0);
        let loose = finite(&infobound::polymatroid_bound(&ctx, target).unwrap().value);

        let sym = q.symbols()[which % q.symbols().len()].to_string();
        let mut lines: Vec<String> = q.symbols().iter().map(|s| format!("card({s}) <= N")).collect();
        lines.push(format!("card({sym}) <= N^{{1/2}}"));
        let atom = q.guard_atom(&sym).unwrap();
        if atom.vars.len() >= 2 {
            lines.push(format!("deg({sym}; {} | {}) <= 1", atom.vars[1], atom.vars[0]));
        }
        let tight = parse_stats(&format!("mode symbolic\n{}", lines.join("\n")), &q).unwrap();
        let ctx = BoundContext::new(&q, &tight).unwrap();
        let tighter = finite(&infobound::polymatroid_bound(&ctx, target).unwrap().value);
        prop_assert!(tighter <= loose);
        prop_assert!(!tighter.is_negative());
    }

    #[test]
    fn subw_at_most_fhtw_with_valid_certificates(q in arb_query(4, 4)) {
        let s = card_stats(&q);
        let sw = infobound::subw(&q, &s, false).unwrap();
        let fw = infobound::fhtw(&q, &s).unwrap();
        prop_assert!(sw.value <= fw.value);
        for (_, b) in &sw.selectors {
            b.flow.as_ref().unwrap().check_identity().unwrap();
        }
    }
}
