use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use cqbound::corpus;
use cqbound::error::{Error, Result};
use cqbound::hypergraph::{self, TreeDecomposition};
use cqbound::infobound::{self, BoundContext, DdrBound, Extended};
use cqbound::oracle;
use cqbound::pandaexec::{AdaptivePlan, ExecConfig, PlanReport, StaticPlan};
use cqbound::proofmachine;
use cqbound::qmodel::{self, ConjunctiveQuery, StatisticsSet};
use cqbound::relcore::Relation;
use cqbound::varset::VarSet;

#[derive(Parser)]
#[command(name = "cqbound", version, about = "Output-size bounds, width measures and bound-driven evaluation of conjunctive queries")]
struct Cli {
    /// Structured output.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Fhtw,
    Subw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Plan {
    Static,
    Adaptive,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Polymatroid bound on the output size, as an exponent of N.
    Bound {
        query: PathBuf,
        stats: PathBuf,
        /// `head`, `all`, or a variable set such as `XYZ` or `X,Y,Z`.
        #[arg(long, default_value = "head")]
        target: String,
    },
    /// Fractional hypertree width or submodular width.
    Width {
        query: PathBuf,
        stats: PathBuf,
        #[arg(long, value_enum, default_value = "subw")]
        measure: Measure,
    },
    /// Shannon-flow inequality and proof sequence for one bag selector.
    Prove {
        query: PathBuf,
        stats: PathBuf,
        /// Selector index, or its bags such as `XYZ,YZW`.
        #[arg(long, default_value = "0")]
        selector: String,
        /// Drop this unconditional source and print the reduced inequality.
        #[arg(long)]
        reset: Option<String>,
    },
    /// Evaluates the query and writes the answer as canonical CSV.
    Run {
        query: PathBuf,
        stats: PathBuf,
        data: PathBuf,
        #[arg(long, value_enum, default_value = "adaptive")]
        plan: Plan,
        /// Decomposition index for the static plan, or `best`.
        #[arg(long, default_value = "best")]
        td: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Execution report destination.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Skip checking numeric statistics against the data.
        #[arg(long)]
        no_validate: bool,
    },
    /// Compares adaptive, best static and brute-force answers.
    Verify {
        query: Option<PathBuf>,
        data: Option<PathBuf>,
        /// Statistics file; cardinality constraints over N when absent.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Check this many seeded random instances instead of a data directory.
        #[arg(long)]
        corpus: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tightest numeric statistics the data satisfies.
    Stats {
        query: PathBuf,
        data: PathBuf,
        /// Largest conditioning set.
        #[arg(long, default_value_t = 1)]
        max_cond: usize,
    },
}

/// Stages expanded when searching for a short proof sequence.
const PROOF_SEARCH_BUDGET: usize = 20_000;

/// Ends a command with a specific exit status.
struct Exit(u8, String);

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. }
            | Error::Semantic(_)
            | Error::Schema(_)
            | Error::Argument(_)
            | Error::Mode(_)
            | Error::Data { .. }
            | Error::Io(_) => 2,
            Error::Unbounded(_) => 3,
            Error::Guard(_) => 5,
            _ => 1,
        };
        Exit(code, e.to_string())
    }
}

type CmdResult = std::result::Result<(), Exit>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load(query: &Path, stats: &Path) -> Result<(ConjunctiveQuery, StatisticsSet)> {
    let q = qmodel::parse_query(&read(query)?)?;
    let s = qmodel::parse_stats(&read(stats)?, &q)?;
    Ok((q, s))
}

/// `XYZ` or `X,Y,Z`; names are matched longest first.
fn parse_set(q: &ConjunctiveQuery, text: &str) -> Result<VarSet> {
    let mut names: Vec<(usize, &str)> = q.vars().iter().enumerate().map(|(i, v)| (i, v.name())).collect();
    names.sort_by_key(|(_, n)| std::cmp::Reverse(n.len()));
    let mut out = VarSet::EMPTY;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let mut rest = part;
        while !rest.is_empty() {
            let (i, n) = names
                .iter()
                .find(|(_, n)| rest.starts_with(n))
                .ok_or_else(|| Error::Argument(format!("unknown variable in `{text}`")))?;
            out = out.with(*i);
            rest = &rest[n.len()..];
        }
    }
    Ok(out)
}

fn finite(b: &Extended, what: &str) -> std::result::Result<(), Exit> {
    match b {
        Extended::Finite(_) => Ok(()),
        Extended::Infinite => Err(Exit(3, format!("{what} is unbounded"))),
    }
}

fn emit(json: bool, value: Json, text: String) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).expect("json"));
    } else {
        print!("{text}");
    }
}

fn cmd_bound(cli: &Cli, query: &Path, stats: &Path, target: &str) -> CmdResult {
    let (q, s) = load(query, stats)?;
    let set = match target {
        "head" => q.free_set(),
        "all" => q.all_set(),
        t => parse_set(&q, t)?,
    };
    let ctx = BoundContext::new(&q, &s)?;
    let b = infobound::polymatroid_bound(&ctx, set)?;
    let names = q.vars();
    let ineq = b.flow.as_ref().map(|f| f.render(names));
    let witness = b.witness.as_ref().map(|w| w.render(names));
    let mut text = format!("target: {}\nlog_N bound: {}\n", q.render_set(set), b.value);
    if let Extended::Finite(_) = b.value {
        text += &format!("approx: {}\n", b.value.to_f64());
    }
    if let Some(i) = &ineq {
        text += &format!("inequality: {i}\n");
    }
    if let Some(w) = &witness {
        text += &format!("witness: {w}\n");
    }
    emit(
        cli.json,
        json!({
            "target": q.render_set(set),
            "log_bound": b.value.to_string(),
            "approx": b.value.to_f64(),
            "inequality": ineq,
            "witness": witness,
        }),
        text,
    );
    finite(&b.value, "the bound")
}

fn cmd_width(cli: &Cli, query: &Path, stats: &Path, measure: Measure) -> CmdResult {
    let (q, s) = load(query, stats)?;
    let names = q.vars();
    match measure {
        Measure::Fhtw => {
            let rep = infobound::fhtw(&q, &s)?;
            let mut text = format!("fhtw = {}\n", rep.value);
            let mut tds = Vec::new();
            for (i, (td, (cost, bags))) in rep.tds.iter().zip(&rep.per_td).enumerate() {
                let mark = if i == rep.best { "*" } else { " " };
                let parts: Vec<String> = bags.iter().map(|(b, v)| format!("{}: {v}", q.render_set(*b))).collect();
                text += &format!("{mark}{i:>3}  {}  cost {cost}  [{}]\n", td.render(&q), parts.join(", "));
                tds.push(json!({
                    "td": td.render(&q),
                    "cost": cost.to_string(),
                    "bags": bags.iter().map(|(b, v)| json!({"bag": q.render_set(*b), "bound": v.to_string()})).collect::<Vec<_>>(),
                }));
            }
            emit(
                cli.json,
                json!({"measure": "fhtw", "value": rep.value.to_string(), "best": rep.best, "tds": tds}),
                text,
            );
            finite(&rep.value, "fhtw")
        }
        Measure::Subw => {
            let rep = infobound::subw(&q, &s, false)?;
            let mut text = format!("subw = {}\n", rep.value);
            for td in &rep.tds {
                text += &format!("decomposition {}\n", td.render(&q));
            }
            let mut sels = Vec::new();
            for (i, (sel, b)) in rep.selectors.iter().enumerate() {
                let ineq = b.flow.as_ref().map(|f| f.render(names));
                text += &format!("{i:>3}  {}: {}", sel.render(&q), b.value);
                if let Some(f) = &ineq {
                    text += &format!("  certificate {f}");
                }
                text.push('\n');
                sels.push(json!({"selector": sel.render(&q), "value": b.value.to_string(), "certificate": ineq}));
            }
            emit(
                cli.json,
                json!({
                    "measure": "subw",
                    "value": rep.value.to_string(),
                    "tds": rep.tds.iter().map(|t| t.render(&q)).collect::<Vec<_>>(),
                    "selectors": sels,
                }),
                text,
            );
            finite(&rep.value, "subw")
        }
    }
}

fn choose_selector(q: &ConjunctiveQuery, rep: &[(hypergraph::BagSelector, DdrBound)], key: &str) -> Result<usize> {
    if let Ok(i) = key.parse::<usize>() {
        return if i < rep.len() {
            Ok(i)
        } else {
            Err(Error::Argument(format!("selector {i} out of range (0..{})", rep.len())))
        };
    }
    let mut want = key
        .split(',')
        .map(|p| parse_set(q, p))
        .collect::<Result<Vec<_>>>()?;
    want.sort();
    want.dedup();
    rep.iter()
        .position(|(sel, _)| sel.heads() == want)
        .ok_or_else(|| Error::Argument(format!("no selector with bags {key}")))
}

fn cmd_prove(cli: &Cli, query: &Path, stats: &Path, selector: &str, reset: Option<&str>) -> CmdResult {
    let (q, s) = load(query, stats)?;
    let names = q.vars();
    let rep = infobound::subw(&q, &s, false)?;
    let i = choose_selector(&q, &rep.selectors, selector)?;
    let (sel, b) = &rep.selectors[i];
    finite(&b.value, &format!("selector {}", sel.render(&q)))?;
    let raw = b.flow.as_ref().ok_or_else(|| Exit(1, "no certificate".into()))?;
    raw.check_identity()?;
    let ctx = BoundContext::new(&q, &s)?;
    let lean = infobound::lighten(&ctx, raw)?;
    let flow = &lean;
    let (id, scale) = proofmachine::to_integral(flow)?;
    let seq = proofmachine::construct_shortest_proof_sequence(&id, PROOF_SEARCH_BUDGET)?;
    let verdict = proofmachine::verify(&id, &seq.steps());
    let steps: Vec<String> = seq.steps().iter().map(|st| st.render(names)).collect();
    let mut text = format!(
        "selector {}: log_N bound {}\nshannon flow: {}\nscale: {scale}\ninequality: {}\n",
        sel.render(&q),
        b.value,
        flow.render(names),
        id.render(names)
    );
    for (k, st) in steps.iter().enumerate() {
        text += &format!("{:>3}. {st}\n", k + 1);
    }
    text += match &verdict {
        Ok(()) => "VERIFIED\n",
        Err(_) => "REJECTED\n",
    };
    let mut reset_json = Json::Null;
    if let Some(r) = reset {
        let drop = parse_set(&q, r)?;
        let out = proofmachine::reset(&id, drop)?;
        out.identity.check()?;
        let lost = out.lost_target.map(|t| format!("h({})", q.render_set(t)));
        text += &format!("reset h({}): {}\n", q.render_set(drop), out.identity.render(names));
        if let Some(l) = &lost {
            text += &format!("lost target: {l}\n");
        }
        reset_json = json!({"drop": q.render_set(drop), "inequality": out.identity.render(names), "lost_target": lost});
    }
    emit(
        cli.json,
        json!({
            "selector": sel.render(&q),
            "bound": b.value.to_string(),
            "shannon_flow": flow.render(names),
            "scale": scale.to_string(),
            "inequality": id.render(names),
            "steps": steps,
            "verified": verdict.is_ok(),
            "reset": reset_json,
        }),
        text,
    );
    verdict.map_err(|e| Exit(1, format!("proof sequence rejected: {e}")))
}

fn pick_td(q: &ConjunctiveQuery, s: &StatisticsSet, td: &str) -> Result<StaticPlan> {
    if td == "best" {
        return StaticPlan::best(q, s);
    }
    let tds = hypergraph::enumerate_tds(q)?;
    let i: usize = td
        .parse()
        .map_err(|_| Error::Argument(format!("--td expects an index or `best`, got `{td}`")))?;
    let chosen: &TreeDecomposition = tds
        .get(i)
        .ok_or_else(|| Error::Argument(format!("decomposition {i} out of range (0..{})", tds.len())))?;
    StaticPlan::new(q, s, chosen)
}

fn report_json(q: &ConjunctiveQuery, r: &PlanReport) -> Json {
    json!({
        "static_fallback": r.static_fallback,
        "peak_intermediate": r.peak_intermediate,
        "bag_sizes": r.bag_sizes.iter().map(|(b, n)| json!({"bag": q.render_set(*b), "size": n})).collect::<Vec<_>>(),
        "rules": r.rules.iter().map(|(heads, e)| json!({
            "heads": heads.iter().map(|h| q.render_set(*h)).collect::<Vec<_>>(),
            "log_bound": e.log_bound.to_string(),
            "bound": e.bound,
            "bound_ceil": e.bound_ceil.to_string(),
            "output_sizes": e.output_sizes.iter().map(|(b, n)| json!({"bag": q.render_set(*b), "size": n})).collect::<Vec<_>>(),
            "max_intermediate": e.max_intermediate,
            "steps": e.steps,
            "branches": e.branches,
            "dropped": e.dropped,
        })).collect::<Vec<_>>(),
    })
}

fn report_text(q: &ConjunctiveQuery, r: &PlanReport) -> String {
    let mut out = String::new();
    if r.static_fallback {
        out += "adaptive plan fell back to one decomposition\n";
    }
    for (heads, e) in &r.rules {
        let hs: Vec<String> = heads.iter().map(|h| q.render_set(*h)).collect();
        let sizes: Vec<String> = e.output_sizes.iter().map(|(b, n)| format!("{}={n}", q.render_set(*b))).collect();
        out += &format!(
            "rule ({}): B = N^{} <= {}  outputs {}  max intermediate {}  branches {}\n",
            hs.join(", "),
            e.log_bound,
            e.bound_ceil,
            sizes.join(" "),
            e.max_intermediate,
            e.branches
        );
    }
    for (b, n) in &r.bag_sizes {
        out += &format!("bag {}: {n}\n", q.render_set(*b));
    }
    out += &format!("peak intermediate: {}\n", r.peak_intermediate);
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cli: &Cli,
    query: &Path,
    stats: &Path,
    data: &Path,
    plan: Plan,
    td: &str,
    output: Option<&Path>,
    report: Option<&Path>,
    no_validate: bool,
) -> CmdResult {
    let (q, s) = load(query, stats)?;
    let db = qmodel::load_database(data, &q)?;
    if !no_validate && !s.is_symbolic() {
        let bad = qmodel::check_stats(&db, &s, &q)?;
        if !bad.is_empty() {
            let lines: Vec<String> = bad.iter().map(|v| v.to_string()).collect();
            return Err(Exit(4, format!("statistics violated:\n{}", lines.join("\n"))));
        }
    }
    let cfg = ExecConfig {
        audit: false,
        n_exec: None,
    };
    let (answer, rep): (Relation, Option<PlanReport>) = match plan {
        Plan::Oracle => (oracle::brute_join(&q, &db)?, None),
        Plan::Static => {
            let (r, rep) = pick_td(&q, &s, td)?.execute(&q, &s, &db, &cfg)?;
            (r, Some(rep))
        }
        Plan::Adaptive => {
            let (r, rep) = AdaptivePlan::new(&q, &s)?.execute(&q, &s, &db, &cfg)?;
            (r, Some(rep))
        }
    };
    let csv = qmodel::write_csv(&answer);
    match output {
        Some(p) => fs::write(p, &csv).map_err(Error::Io)?,
        None => print!("{csv}"),
    }
    if let (Some(path), Some(rep)) = (report, rep) {
        let body = if cli.json {
            serde_json::to_string_pretty(&report_json(&q, &rep)).expect("json")
        } else {
            report_text(&q, &rep)
        };
        fs::write(path, body).map_err(Error::Io)?;
    }
    Ok(())
}

fn verify_one(
    q: &ConjunctiveQuery,
    s: &StatisticsSet,
    db: &cqbound::relcore::Database,
    plans: &(AdaptivePlan, StaticPlan),
) -> Result<Vec<(&'static str, oracle::OracleReport)>> {
    let cfg = ExecConfig {
        audit: true,
        n_exec: None,
    };
    let expect = oracle::brute_join(q, db)?;
    let (a, _) = plans.0.execute(q, s, db, &cfg)?;
    let (b, _) = plans.1.execute(q, s, db, &cfg)?;
    Ok(vec![
        ("adaptive", oracle::compare(&expect, &a)?),
        ("static-best", oracle::compare(&expect, &b)?),
    ])
}

fn cmd_verify(
    cli: &Cli,
    query: Option<&Path>,
    data: Option<&Path>,
    stats: Option<&Path>,
    count: Option<u64>,
    seed: u64,
) -> CmdResult {
    let mut runs = Vec::new();
    match count {
        Some(k) => {
            // plans depend on the query and statistics only
            let mut plans = BTreeMap::new();
            for i in 0..k {
                let inst = corpus::instance(seed + i)?;
                if !plans.contains_key(inst.shape) {
                    let p = (
                        AdaptivePlan::new(&inst.query, &inst.stats)?,
                        StaticPlan::best(&inst.query, &inst.stats)?,
                    );
                    plans.insert(inst.shape, p);
                }
                let label = format!("{}#{}", inst.shape, inst.seed);
                runs.push((label, verify_one(&inst.query, &inst.stats, &inst.db, &plans[inst.shape])?));
            }
        }
        None => {
            let (Some(query), Some(data)) = (query, data) else {
                return Err(Exit(2, "verify needs QUERY and DATA, or --corpus".into()));
            };
            let q = qmodel::parse_query(&read(query)?)?;
            let s = match stats {
                Some(p) => qmodel::parse_stats(&read(p)?, &q)?,
                None => corpus::card_stats(&q)?,
            };
            let db = qmodel::load_database(data, &q)?;
            let plans = (AdaptivePlan::new(&q, &s)?, StaticPlan::best(&q, &s)?);
            runs.push((query.display().to_string(), verify_one(&q, &s, &db, &plans)?));
        }
    }
    let mut text = String::new();
    let mut items = Vec::new();
    let mut all = true;
    for (label, reps) in &runs {
        for (plan, r) in reps {
            all &= r.matches;
            let verdict = if r.matches { "match" } else { "MISMATCH" };
            text += &format!("{label} {plan}: {verdict} (missing {}, extra {})\n", r.missing.len(), r.extra.len());
            items.push(json!({"instance": label, "plan": plan, "matches": r.matches, "missing": r.missing.len(), "extra": r.extra.len()}));
        }
    }
    text += if all { "all plans match the oracle\n" } else { "mismatches found\n" };
    emit(cli.json, json!({"matches": all, "runs": items}), text);
    if all {
        Ok(())
    } else {
        Err(Exit(1, "plan answers differ from the oracle".into()))
    }
}

fn cmd_stats(cli: &Cli, query: &Path, data: &Path, max_cond: usize) -> CmdResult {
    let q = qmodel::parse_query(&read(query)?)?;
    let db = qmodel::load_database(data, &q)?;
    let s = qmodel::infer_stats(&db, &q, max_cond)?;
    let text = s.render(&q);
    emit(cli.json, json!({"stats": text}), text.clone());
    Ok(())
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.cmd {
        Command::Bound { query, stats, target } => cmd_bound(cli, query, stats, target),
        Command::Width { query, stats, measure } => cmd_width(cli, query, stats, *measure),
        Command::Prove {
            query,
            stats,
            selector,
            reset,
        } => cmd_prove(cli, query, stats, selector, reset.as_deref()),
        Command::Run {
            query,
            stats,
            data,
            plan,
            td,
            output,
            report,
            no_validate,
        } => cmd_run(
            cli,
            query,
            stats,
            data,
            *plan,
            td,
            output.as_deref(),
            report.as_deref(),
            *no_validate,
        ),
        Command::Verify {
            query,
            data,
            stats,
            corpus,
            seed,
        } => cmd_verify(cli, query.as_deref(), data.as_deref(), stats.as_deref(), *corpus, *seed),
        Command::Stats { query, data, max_cond } => cmd_stats(cli, query, data, *max_cond),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
