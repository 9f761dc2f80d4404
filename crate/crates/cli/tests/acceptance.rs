//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines show up in plain `cargo test` output.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;

use cqbound::corpus::{self, SHAPES};
use cqbound::hypergraph::{self, Hypergraph};
use cqbound::infobound::{self, BoundContext, Extended};
use cqbound::oracle;
use cqbound::pandaexec::{self, ExecConfig};
use cqbound::proofmachine;
use cqbound::qmodel::{self, parse_query, parse_stats};
use cqbound::relcore::{self, Database, JoinTree, Relation, Schema, Value};
use cqbound::varset::VarSet;
use cqbound::Rational;

type Outcome = Result<String, String>;

const CYCLE: &str = "Q(X,Y) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).\n";
const CYCLE_FULL: &str = "Q(X,Y,Z,W) :- R(X,Y), S(Y,Z), T(Z,W), U(W,X).\n";
const CARD: &str = "mode symbolic\ncard(R) <= N\ncard(S) <= N\ncard(T) <= N\ncard(U) <= N\n";
const FULL_SYM: &str = "mode symbolic\ncard(R) <= N\ncard(S) <= N\ncard(T) <= N\ncard(U) <= N\n\
                        deg(U; X | W) <= 1\ndeg(U; W | X) <= N^{1/2}\n";
const FULL_NUM: &str = "mode numeric N=10000\ncard(R) <= 10000\ncard(S) <= 10000\ncard(T) <= 10000\n\
                        card(U) <= 10000\ndeg(U; X | W) <= 1\ndeg(U; W | X) <= 100\n";

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("temp dir");
        let root = dir.path().to_path_buf();
        let files = [
            ("cycle.q", CYCLE),
            ("cycle_full.q", CYCLE_FULL),
            ("card.stats", CARD),
            ("full_sym.stats", FULL_SYM),
            ("full_num.stats", FULL_NUM),
            ("data/R.csv", "X,Y\n1,p\n1,q\n2,p\n"),
            ("data/S.csv", "Y,Z\np,3\nq,4\nq,5\n"),
            ("data/T.csv", "Z,W\n3,i\n5,i\n5,j\n"),
            ("data/U.csv", "W,X\ni,1\nj,1\nk,2\n"),
        ];
        fs::create_dir_all(root.join("data")).unwrap();
        for (name, body) in files {
            fs::write(root.join(name), body).unwrap();
        }
        Workspace { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn cqbound(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cqbound"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("run cqbound")
}

fn stdout_ok(out: &Output) -> Result<String, String> {
    if !out.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn json_of(out: &Output) -> Result<Json, String> {
    serde_json::from_str(&stdout_ok(out)?).map_err(|e| e.to_string())
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1(ws: &Workspace) -> Outcome {
    let start = Instant::now();
    let out = cqbound(&[&"width", &ws.path("cycle.q"), &ws.path("card.stats"), &"--measure", &"subw"]);
    let elapsed = start.elapsed().as_secs_f64();
    let text = stdout_ok(&out)?;
    check(text.lines().next() == Some("subw = 3/2"), || format!("first line {:?}", text.lines().next()))?;
    let js = json_of(&cqbound(&[
        &"--json",
        &"width",
        &ws.path("cycle.q"),
        &ws.path("card.stats"),
        &"--measure",
        &"subw",
    ]))?;
    let sels = js["selectors"].as_array().ok_or("no selectors")?;
    check(sels.len() == 4, || format!("{} selectors", sels.len()))?;
    check(sels.iter().all(|s| s["value"] == "3/2"), || format!("selector values {sels:?}"))?;
    check(elapsed < 5.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("subw = 3/2, 4 selectors at 3/2, {elapsed:.2}s"))
}

fn criterion_2(ws: &Workspace) -> Outcome {
    let out = cqbound(&[&"width", &ws.path("cycle.q"), &ws.path("card.stats"), &"--measure", &"fhtw"]);
    let text = stdout_ok(&out)?;
    check(text.lines().next() == Some("fhtw = 2"), || format!("first line {:?}", text.lines().next()))?;
    Ok("fhtw = 2".into())
}

fn criterion_3(ws: &Workspace) -> Outcome {
    let out = cqbound(&[&"bound", &ws.path("cycle_full.q"), &ws.path("full_sym.stats")]);
    let text = stdout_ok(&out)?;
    check(text.lines().any(|l| l == "log_N bound: 7/4"), || text.clone())?;
    let js = json_of(&cqbound(&[&"--json", &"bound", &ws.path("cycle_full.q"), &ws.path("full_num.stats")]))?;
    let v = js["approx"].as_f64().ok_or("no numeric value")?;
    check((v - 1.75).abs() < 1e-9, || format!("numeric value {v}"))?;
    Ok(format!("symbolic 7/4, numeric {v}"))
}

/// Replays rendered steps on a multiset of rendered terms. Each step must
/// have one of the four shapes and consume terms that are present.
fn replay(sources: &[String], steps: &[String], targets: &[String]) -> Result<(), String> {
    fn parse_term(t: &str) -> Result<(String, String), String> {
        let inner = t.strip_prefix("h(").and_then(|r| r.strip_suffix(')')).ok_or(format!("term {t}"))?;
        Ok(match inner.split_once('|') {
            Some((y, x)) => (y.to_string(), x.to_string()),
            None => (inner.to_string(), String::new()),
        })
    }
    fn letters(s: &str) -> Vec<char> {
        let mut v: Vec<char> = s.chars().collect();
        v.sort_unstable();
        v
    }
    fn union(a: &str, b: &str) -> Vec<char> {
        let mut v = letters(&format!("{a}{b}"));
        v.dedup();
        v
    }
    fn subset(a: &str, b: &str) -> bool {
        letters(a).iter().all(|c| b.contains(*c))
    }
    fn disjoint(a: &str, b: &str) -> bool {
        !a.chars().any(|c| b.contains(c))
    }
    let mut bag: BTreeMap<(String, String), usize> = BTreeMap::new();
    let add = |bag: &mut BTreeMap<(String, String), usize>, t: (String, String)| *bag.entry(t).or_insert(0) += 1;
    for s in sources {
        add(&mut bag, parse_term(s)?);
    }
    for step in steps {
        let (lhs, rhs) = step.split_once(" -> ").ok_or(format!("step {step}"))?;
        let cons: Vec<(String, String)> = lhs.split(" + ").map(parse_term).collect::<Result<_, _>>()?;
        let prod: Vec<(String, String)> = rhs.split(" + ").map(parse_term).collect::<Result<_, _>>()?;
        let valid = match (cons.as_slice(), prod.as_slice()) {
            // h(YX) -> h(X) + h(Y|X)
            ([(w, e)], [(a, ea), (y, x)]) if e.is_empty() && ea.is_empty() => {
                x == a && disjoint(y, a) && union(a, y) == letters(w) && !a.is_empty()
            }
            // h(X) + h(Y|X) -> h(XY)
            ([(a, ea), (y, x)], [(w, e)]) if ea.is_empty() && e.is_empty() => {
                x == a && disjoint(y, a) && union(a, y) == letters(w)
            }
            // h(Y|X) -> h(Y|XZ), including an empty X
            ([(y, x)], [(y2, x2)]) if y == y2 && !x2.is_empty() => subset(x, x2) && disjoint(y, x2) && x != x2,
            // h(B) -> h(A) with A inside B
            ([(b, eb)], [(a, ea)]) if eb.is_empty() && ea.is_empty() => subset(a, b) && a != b,
            _ => false,
        };
        if !valid {
            return Err(format!("invalid step {step}"));
        }
        for c in cons {
            match bag.get_mut(&c) {
                Some(n) if *n > 0 => *n -= 1,
                _ => return Err(format!("step {step} consumes a missing term")),
            }
        }
        for p in prod {
            add(&mut bag, p);
        }
    }
    for t in targets {
        match bag.get_mut(&parse_term(t)?) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return Err(format!("target {t} not produced")),
        }
    }
    Ok(())
}

fn criterion_4(ws: &Workspace) -> Outcome {
    let out = cqbound(&[
        &"--json",
        &"prove",
        &ws.path("cycle.q"),
        &ws.path("card.stats"),
        &"--selector",
        &"XYZ,YZW",
        &"--reset",
        &"XY",
    ]);
    let js = json_of(&out)?;
    let ineq = js["inequality"].as_str().ok_or("no inequality")?;
    check(ineq == "h(XYZ) + h(YZW) <= h(XY) + h(YZ) + h(ZW)", || ineq.to_string())?;
    check(js["scale"] == "2", || format!("scale {}", js["scale"]))?;
    check(js["verified"] == true, || "not verified".into())?;
    let steps: Vec<String> = js["steps"]
        .as_array()
        .ok_or("no steps")?
        .iter()
        .map(|s| s.as_str().unwrap_or_default().to_string())
        .collect();
    let (lhs, rhs) = ineq.split_once(" <= ").unwrap();
    let targets: Vec<String> = lhs.split(" + ").map(str::to_string).collect();
    let sources: Vec<String> = rhs.split(" + ").map(str::to_string).collect();
    replay(&sources, &steps, &targets)?;
    let reset = js["reset"]["inequality"].as_str().ok_or("no reset")?;
    check(reset == "h(YZW) <= h(YZ) + h(ZW)", || reset.to_string())?;
    let text = stdout_ok(&cqbound(&[&"prove", &ws.path("cycle.q"), &ws.path("card.stats"), &"--selector", &"XYZ,YZW"]))?;
    check(text.lines().any(|l| l == "VERIFIED"), || "no VERIFIED line".into())?;
    Ok(format!("scale 2, {} steps replayed, reset gives {reset}", steps.len()))
}

/// `([n/2] × [1]) ∪ ([1] × [n/2])` in every relation.
fn skewed(n: i64) -> Database {
    let mut db = Database::new();
    for (sym, cols) in [("R", "X,Y"), ("S", "Y,Z"), ("T", "Z,W"), ("U", "W,X")] {
        let mut rows = Vec::new();
        for i in 1..=n / 2 {
            rows.push(vec![Value::Int(i), Value::Int(1)]);
            rows.push(vec![Value::Int(1), Value::Int(i)]);
        }
        let schema = Schema::new(relcore::vars(cols)).unwrap();
        db.insert(sym, Relation::from_tuples(schema, rows).unwrap());
    }
    db
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let q = parse_query(CYCLE).unwrap();
    let s = parse_stats(CARD, &q).unwrap();
    let ctx = BoundContext::new(&q, &s).map_err(|e| e.to_string())?;
    let bags = [VarSet::from_indices([0, 1, 2]), VarSet::from_indices([1, 2, 3])];
    let flow = infobound::ddr_bound(&ctx, &bags).map_err(|e| e.to_string())?.flow.ok_or("unbounded")?;
    let mut points = Vec::new();
    for n in [8i64, 16, 32, 64] {
        let db = skewed(n);
        let cfg = ExecConfig {
            audit: true,
            n_exec: None,
        };
        let out = pandaexec::evaluate_ddr(&q, &bags, &s, &db, &flow, &cfg).map_err(|e| e.to_string())?;
        let rep = oracle::check_ddr_model(&q, &bags, &db, &out.outputs).map_err(|e| e.to_string())?;
        check(rep.matches, || format!("N = {n}: {} body tuples uncovered", rep.missing.len()))?;
        let cap = (n as f64).powf(1.5).ceil() as usize;
        let biggest = out.outputs.values().map(Relation::len).max().unwrap_or(0);
        check(biggest <= cap, || format!("N = {n}: output {biggest} > {cap}"))?;
        points.push(((n as f64).ln(), (biggest.max(1) as f64).ln()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let elapsed = start.elapsed().as_secs_f64();
    check(slope <= 1.6, || format!("growth exponent {slope:.3}"))?;
    check(elapsed < 30.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("models valid, sizes within N^1.5, exponent {slope:.3}, {elapsed:.2}s"))
}

fn criterion_6(ws: &Workspace) -> Outcome {
    let mut outputs = Vec::new();
    for (query, expect) in [
        ("cycle.q", "X,Y\n1,p\n1,q\n"),
        ("cycle_full.q", "X,Y,Z,W\n1,p,3,i\n1,q,5,i\n1,q,5,j\n"),
    ] {
        for round in 0..2 {
            let dest = ws.path(&format!("{query}.{round}.csv"));
            let out = cqbound(&[
                &"run",
                &ws.path(query),
                &ws.path("card.stats"),
                &ws.path("data"),
                &"--plan",
                &"adaptive",
                &"--output",
                &dest,
            ]);
            stdout_ok(&out)?;
            outputs.push(fs::read(&dest).map_err(|e| e.to_string())?);
        }
        let n = outputs.len();
        check(outputs[n - 1] == outputs[n - 2], || format!("{query}: output differs between runs"))?;
        check(outputs[n - 1] == expect.as_bytes(), || {
            format!("{query}: got {:?}", String::from_utf8_lossy(&outputs[n - 1]))
        })?;
    }
    Ok("{(1,p),(1,q)} and the three full tuples, byte-identical across runs".into())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let js = json_of(&cqbound(&[&"--json", &"verify", &"--corpus", &"100", &"--seed", &"0"]))?;
    let runs = js["runs"].as_array().ok_or("no runs")?;
    let bad: Vec<&Json> = runs.iter().filter(|r| r["matches"] != true).collect();
    check(runs.len() == 200, || format!("{} plan runs", runs.len()))?;
    check(bad.is_empty(), || format!("{} mismatches, first {}", bad.len(), bad[0]))?;
    let shapes: Vec<&str> = SHAPES.iter().map(|(s, _)| *s).collect();
    Ok(format!(
        "100 instances over {}, 0 mismatches, {:.2}s",
        shapes.join("/"),
        start.elapsed().as_secs_f64()
    ))
}

/// Minimum of `Σ x_e` subject to every variable being covered with weight
/// at least one, by enumerating the vertices of the covering polyhedron.
fn edge_cover_number(edges: &[VarSet], n: usize) -> Option<Rational> {
    let m = edges.len();
    // rows: -Σ_{e ∋ v} x_e <= -1, then -x_e <= 0
    let mut rows: Vec<(Vec<Rational>, Rational)> = (0..n)
        .map(|v| {
            let row = edges
                .iter()
                .map(|e| if e.contains(v) { -Rational::one() } else { Rational::zero() })
                .collect();
            (row, -Rational::one())
        })
        .collect();
    for e in 0..m {
        let mut row = vec![Rational::zero(); m];
        row[e] = -Rational::one();
        rows.push((row, Rational::zero()));
    }
    let mut best: Option<Rational> = None;
    let total = rows.len();
    let mut pick: Vec<usize> = (0..m).collect();
    loop {
        let mut a: Vec<Vec<Rational>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let mut b: Vec<Rational> = pick.iter().map(|&i| rows[i].1.clone()).collect();
        let mut singular = false;
        for col in 0..m {
            let Some(p) = (col..m).find(|&r| !a[r][col].is_zero()) else {
                singular = true;
                break;
            };
            a.swap(col, p);
            b.swap(col, p);
            for r in 0..m {
                if r != col && !a[r][col].is_zero() {
                    let f = &a[r][col] / &a[col][col];
                    let pivot = a[col].clone();
                    for (v, p) in a[r].iter_mut().zip(&pivot) {
                        *v -= &f * p;
                    }
                    let d = &f * &b[col];
                    b[r] -= d;
                }
            }
        }
        if !singular {
            let x: Vec<Rational> = (0..m).map(|i| &b[i] / &a[i][i]).collect();
            let feasible = rows
                .iter()
                .all(|(row, rhs)| row.iter().zip(&x).map(|(p, q)| p * q).sum::<Rational>() <= *rhs);
            if feasible {
                let v: Rational = x.iter().cloned().sum();
                if best.as_ref().is_none_or(|b| v < *b) {
                    best = Some(v);
                }
            }
        }
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - m + i {
                pick[i] += 1;
                for j in i + 1..m {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let names = ["A", "B", "C", "D", "E"];
    let mut seen = Vec::new();
    for _ in 0..10 {
        let nv = rng.gen_range(3..=5);
        let na = rng.gen_range(2..=5);
        let mut atoms: Vec<Vec<&str>> = (0..na)
            .map(|_| {
                let mut vs: Vec<&str> = names[..nv].iter().copied().filter(|_| rng.gen_bool(0.45)).collect();
                if vs.is_empty() {
                    vs.push(names[rng.gen_range(0..nv)]);
                }
                vs
            })
            .collect();
        // every variable appears somewhere
        for v in &names[..nv] {
            if !atoms.iter().any(|a| a.contains(v)) {
                let i = rng.gen_range(0..atoms.len());
                atoms[i].push(v);
            }
        }
        let body: Vec<String> = atoms.iter().enumerate().map(|(i, a)| format!("R{i}({})", a.join(","))).collect();
        let text = format!("Q({}) :- {}.", names[..nv].join(","), body.join(", "));
        let q = parse_query(&text).map_err(|e| e.to_string())?;
        let s = corpus::card_stats(&q).map_err(|e| e.to_string())?;
        let ctx = BoundContext::new(&q, &s).map_err(|e| e.to_string())?;
        let got = match infobound::polymatroid_bound(&ctx, q.all_set()).map_err(|e| e.to_string())?.value {
            Extended::Finite(v) => v,
            Extended::Infinite => return Err(format!("{text}: unbounded")),
        };
        let edges: Vec<VarSet> = (0..q.atoms.len()).map(|i| q.atom_set(i)).collect();
        let expect = edge_cover_number(&edges, q.num_vars()).ok_or("no edge cover")?;
        check(got == expect, || format!("{text}: bound {got}, edge cover {expect}"))?;
        seen.push(got.to_string());
    }
    Ok(format!("10 queries agree exactly ({})", seen.join(" ")))
}

fn criterion_9() -> Outcome {
    let mut pairs = 0;
    let mut certs = 0;
    let mut audited = 0;
    let mut greedy = 0;
    for (k, (shape, text)) in SHAPES.iter().enumerate() {
        let q = parse_query(text).unwrap();
        let s = corpus::card_stats(&q).unwrap();
        let ctx = BoundContext::new(&q, &s).unwrap();
        let err = |e: cqbound::error::Error| format!("{shape}: {e}");
        let sw = infobound::subw(&q, &s, false).map_err(err)?;
        let fw = infobound::fhtw(&q, &s).map_err(err)?;
        pairs += 1;
        check(sw.value <= fw.value, || format!("{shape}: subw {} > fhtw {}", sw.value, fw.value))?;
        let mut rules: Vec<(Vec<VarSet>, infobound::DdrBound)> =
            sw.selectors.iter().map(|(sel, b)| (sel.heads(), b.clone())).collect();
        for td in &fw.tds {
            for b in &td.bags {
                rules.push((vec![*b], infobound::polymatroid_bound(&ctx, *b).map_err(err)?));
            }
        }
        let dbs: Vec<Database> = (0..4u64)
            .map(|i| corpus::instance(i * SHAPES.len() as u64 + k as u64).map(|inst| inst.db))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        for (heads, b) in &rules {
            let flow = b.flow.as_ref().ok_or("missing certificate")?;
            flow.check_identity().map_err(err)?;
            let (id, _) = proofmachine::to_integral(flow).map_err(err)?;
            let seq = proofmachine::construct_proof_sequence(&id).map_err(err)?;
            proofmachine::verify(&id, &seq.steps()).map_err(err)?;
            certs += 1;
            let Extended::Finite(log_b) = &b.value else {
                return Err(format!("{shape}: unbounded rule"));
            };
            for db in &dbs {
                let model = oracle::greedy_ddr_model(&q, heads, db).map_err(err)?;
                let n = qmodel::least_symbolic_n(db, &s).map_err(err)?;
                let cap = n.to_string().parse::<f64>().unwrap().powf(cqbound::scalar::ratio_to_f64(log_b)).ceil();
                for r in model.values() {
                    check(r.len() as f64 <= cap + 1e-9, || format!("{shape}: greedy model {} > {cap}", r.len()))?;
                }
                greedy += 1;
            }
        }
        // measure invariant and mass laws are audited inside the executor
        for db in &dbs {
            let cfg = ExecConfig {
                audit: true,
                n_exec: None,
            };
            for (heads, b) in rules.iter().take(6) {
                let out = pandaexec::evaluate_ddr(&q, heads, &s, db, b.flow.as_ref().unwrap(), &cfg).map_err(err)?;
                if out.report.audited {
                    audited += 1;
                }
            }
        }
    }
    check(certs >= 50, || format!("only {certs} certificates"))?;
    for seed in 0..50 {
        let (q, db) = corpus::acyclic_instance(seed).map_err(|e| e.to_string())?;
        let (ok, tree) = hypergraph::gyo_acyclic(&Hypergraph::of_query(&q));
        check(ok, || format!("{q} is not acyclic"))?;
        let bags = (0..q.atoms.len())
            .map(|i| q.atom_relation(&db, i))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let jt = JoinTree {
            bags,
            edges: tree.unwrap_or_default(),
        };
        let got = relcore::yannakakis(&jt, &q.head).map_err(|e| e.to_string())?;
        let expect = oracle::brute_join(&q, &db).map_err(|e| e.to_string())?;
        check(oracle::compare(&expect, &got).map_err(|e| e.to_string())?.matches, || {
            format!("yannakakis differs on seed {seed}")
        })?;
    }
    Ok(format!(
        "{pairs} shapes subw <= fhtw, {certs} certificates checked and replayed, {greedy} greedy models, \
         {audited} audited executions, 50 acyclic instances"
    ))
}

fn main() {
    let ws = Workspace::new();
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(|| criterion_1(&ws))),
        (2, Box::new(|| criterion_2(&ws))),
        (3, Box::new(|| criterion_3(&ws))),
        (4, Box::new(|| criterion_4(&ws))),
        (5, Box::new(criterion_5)),
        (6, Box::new(|| criterion_6(&ws))),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n}: FAIL ({why})");
            }
        }
    }
    println!(
        "criterion 10: EXCLUDED (runtime constants and matrix-multiplication comparisons are not measured; \
         criterion 5 checks output sizes and growth instead)"
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
