//! Executing proof sequences over data.
//!
//! Every source term of an integral identity carries a sub-probability
//! measure built from the guard relation. Proof steps transform measures
//! in lockstep with the terms. A composed measure is truncated at `1/B`;
//! tuples below the threshold move to a child branch whose identity is the
//! reset of the parent's at the composed term. A branch ends at its first
//! finished target and emits the surviving support to that head bag.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypergraph::{self, TreeDecomposition};
use crate::infobound::{self, BoundContext, Extended, ShannonFlow};
use crate::oracle;
use crate::proofmachine::{self, Identity, Move, Term};
use crate::qmodel::{self, Bound, ConjunctiveQuery, ConstraintKind, StatisticsSet, StatsMode};
use crate::relcore::{self, Database, JoinTree, Relation, Schema, Tuple, Value};
use crate::varset::VarSet;

pub type Rational = BigRational;

/// Audits run only when the body join is at most this large.
pub const AUDIT_LIMIT: usize = 500;

/// Positions of the members of `s` within the ascending member list of
/// `within`.
fn positions(s: VarSet, within: VarSet) -> Vec<usize> {
    let members: Vec<usize> = within.iter().collect();
    s.iter()
        .map(|i| members.iter().position(|&m| m == i).expect("subset"))
        .collect()
}

fn pick(t: &[Value], pos: &[usize]) -> Tuple {
    pos.iter().map(|&p| t[p].clone()).collect()
}

/// Tuples over `vars` (ascending variable order) with exact weights.
/// A conditional measure is keyed on `keys`, the condition variables it
/// actually depends on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedRelation {
    pub vars: VarSet,
    pub keys: VarSet,
    pub rows: BTreeMap<Tuple, Rational>,
}

impl WeightedRelation {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The weight at a full assignment indexed by variable.
    pub fn value_at(&self, full: &[Value]) -> Rational {
        let key: Tuple = self.vars.iter().map(|i| full[i].clone()).collect();
        self.rows.get(&key).cloned().unwrap_or_else(Rational::zero)
    }

    /// Total mass at most 1, or at most 1 per key binding.
    pub fn mass_ok(&self) -> bool {
        let kp = positions(self.keys, self.vars);
        let mut sums: HashMap<Tuple, Rational> = HashMap::new();
        for (t, p) in &self.rows {
            if !p.is_positive() || p > &Rational::one() {
                return false;
            }
            *sums.entry(pick(t, &kp)).or_insert_with(Rational::zero) += p;
        }
        sums.values().all(|s| s <= &Rational::one())
    }

    /// Unconditional marginal onto `onto ⊆ vars`.
    pub fn marginal(&self, onto: VarSet) -> WeightedRelation {
        let pos = positions(onto, self.vars);
        let mut rows: BTreeMap<Tuple, Rational> = BTreeMap::new();
        for (t, p) in &self.rows {
            *rows.entry(pick(t, &pos)).or_insert_with(Rational::zero) += p;
        }
        for p in rows.values_mut() {
            if *p > Rational::one() {
                *p = Rational::one();
            }
        }
        WeightedRelation {
            vars: onto,
            keys: VarSet::EMPTY,
            rows,
        }
    }

    pub fn semijoin(&self, f: &Filter) -> WeightedRelation {
        let common = self.vars & f.vars;
        if common.is_empty() {
            return self.clone();
        }
        let mine = positions(common, self.vars);
        let theirs = positions(common, f.vars);
        let keep: HashSet<Tuple> = f.rows.iter().map(|t| pick(t, &theirs)).collect();
        WeightedRelation {
            vars: self.vars,
            keys: self.keys,
            rows: self
                .rows
                .iter()
                .filter(|(t, _)| keep.contains(&pick(t, &mine)))
                .map(|(t, p)| (t.clone(), p.clone()))
                .collect(),
        }
    }
}

/// A set of tuples over `vars` restricting a branch.
#[derive(Clone, Debug)]
pub struct Filter {
    pub vars: VarSet,
    pub rows: HashSet<Tuple>,
}

impl Filter {
    fn admits(&self, full: &[Value]) -> bool {
        self.rows.contains(&self.vars.iter().map(|i| full[i].clone()).collect::<Tuple>())
    }
}

#[derive(Clone, Debug)]
pub struct TermState {
    pub term: Term,
    pub rel: WeightedRelation,
}

/// `B = K^{1/r}` with `log_N B` alongside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Threshold {
    pub log_value: Rational,
    pub r: u32,
    pub k: BigUint,
}

impl Threshold {
    /// `p >= 1/B`
    pub fn keeps(&self, p: &Rational) -> bool {
        self.product_ok(p, 1)
    }

    /// `p >= B^-l`
    pub fn product_ok(&self, p: &Rational, l: usize) -> bool {
        if !p.is_positive() {
            return false;
        }
        let num = p.numer().magnitude().pow(self.r) * self.k.pow(l as u32);
        num >= p.denom().magnitude().pow(self.r)
    }

    /// `ceil(B)`
    pub fn ceil(&self) -> BigUint {
        let mut m = self.k.nth_root(self.r);
        while m.pow(self.r) < self.k {
            m += 1u32;
        }
        m
    }

    pub fn to_f64(&self) -> f64 {
        self.k.to_f64().unwrap_or(f64::INFINITY).powf(1.0 / self.r as f64)
    }
}

/// `B = Π b^e` over the weighted statistics of a flow. Symbolic bounds use
/// `n_exec` for `N`.
pub fn bound_from_flow(flow: &ShannonFlow, s: &StatisticsSet, n_exec: &BigUint) -> Result<Threshold> {
    let mut factors: Vec<(BigUint, Rational)> = Vec::new();
    for (row, w) in &flow.sources {
        let c = &s.constraints[row.constraint];
        let per = match c.kind {
            ConstraintKind::Degree => w.clone(),
            ConstraintKind::Norm(k) => w / Rational::from_integer(BigInt::from(k)),
        };
        match (&s.mode, &c.bound) {
            (StatsMode::Symbolic, Bound::Power(e)) => factors.push((n_exec.clone(), per * e)),
            (StatsMode::Numeric { .. }, Bound::Count(b)) => factors.push((b.clone(), per)),
            _ => return Err(Error::Mode("bound does not match the statistics mode".into())),
        }
    }
    let r = factors.iter().fold(BigInt::one(), |acc, (_, e)| acc.lcm(e.denom()));
    let r = r
        .to_u32()
        .filter(|r| *r <= 1 << 12)
        .ok_or_else(|| Error::Size("threshold exponent denominator is too large".into()))?;
    let mut k = BigUint::one();
    for (b, e) in &factors {
        let pow = (e * Rational::from_integer(BigInt::from(r))).to_integer();
        let pow = pow
            .to_u32()
            .ok_or_else(|| Error::Size("threshold exponent is too large".into()))?;
        k *= b.pow(pow);
    }
    Ok(Threshold {
        log_value: flow.value(),
        r,
        k,
    })
}

fn query_indices(q: &ConjunctiveQuery, r: &Relation) -> Vec<usize> {
    r.vars().iter().map(|v| q.var_index(v).expect("atom variable")).collect()
}

/// Distinct `xs ∪ ys` projections of an atom, over ascending variables.
fn atom_projection(q: &ConjunctiveQuery, db: &Database, atom: usize, onto: VarSet) -> Result<BTreeSet<Tuple>> {
    let r = q.atom_relation(db, atom)?;
    let cols = query_indices(q, &r);
    let pos: Vec<usize> = onto
        .iter()
        .map(|i| cols.iter().position(|&c| c == i).expect("variable of atom"))
        .collect();
    Ok(r.iter().map(|t| pick(t, &pos)).collect())
}

fn ratio(a: usize, b: usize) -> Rational {
    Rational::new(BigInt::from(a), BigInt::from(b))
}

/// The initial measure of a source term from the statistic that produced
/// it, using the actual degrees of the guard.
pub fn init_state(q: &ConjunctiveQuery, db: &Database, flow: &ShannonFlow, term: Term) -> Result<TermState> {
    let (row, _) = flow
        .sources
        .iter()
        .find(|(row, _)| row.terms().iter().any(|(t, _)| *t == term))
        .ok_or_else(|| Error::StatsMismatch(format!("no statistic produces source {term:?}")))?;
    let proj = atom_projection(q, db, row.atom, row.xs | row.ys)?;
    let xp = positions(row.xs, row.xs | row.ys);
    let mut deg: HashMap<Tuple, usize> = HashMap::new();
    for t in &proj {
        *deg.entry(pick(t, &xp)).or_insert(0) += 1;
    }
    let rel = if term.is_unconditional() && term.ys == row.xs && !row.xs.is_empty() {
        let ConstraintKind::Norm(k) = row.kind else {
            return Err(Error::Internal("marginal source from a degree row".into()));
        };
        let powk = |d: usize| BigInt::from(d).pow(k);
        let total: BigInt = deg.values().map(|&d| powk(d)).sum();
        WeightedRelation {
            vars: row.xs,
            keys: VarSet::EMPTY,
            rows: deg
                .iter()
                .map(|(x, &d)| (x.clone(), Rational::new(powk(d), total.clone())))
                .collect(),
        }
    } else {
        WeightedRelation {
            vars: row.xs | row.ys,
            keys: row.xs,
            rows: proj
                .iter()
                .map(|t| (t.clone(), ratio(1, deg[&pick(t, &xp)])))
                .collect(),
        }
    };
    Ok(TermState { term, rel })
}

#[derive(Clone, Debug, Default)]
pub struct ExecConfig {
    /// Check the measure invariant and mass laws after every stage.
    pub audit: bool,
    /// `N` for symbolic statistics; the least admissible value when unset.
    pub n_exec: Option<BigUint>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionReport {
    pub log_bound: Rational,
    pub bound: f64,
    pub bound_ceil: BigUint,
    /// Per head bag: tuples emitted by the branches, then tuples kept after
    /// filtering by the atoms the bag covers.
    pub emitted_sizes: Vec<(VarSet, usize)>,
    pub output_sizes: Vec<(VarSet, usize)>,
    pub max_intermediate: usize,
    pub steps: usize,
    pub branches: usize,
    /// Overflow tuples whose residual identity had no target left.
    pub dropped: usize,
    pub audited: bool,
}

#[derive(Clone, Debug)]
pub struct DdrOutput {
    pub outputs: BTreeMap<VarSet, Relation>,
    pub report: ExecutionReport,
}

struct Run<'a> {
    q: &'a ConjunctiveQuery,
    threshold: Threshold,
    body: Option<Vec<Tuple>>,
    depth_cap: usize,
    out: BTreeMap<VarSet, BTreeSet<Tuple>>,
    report: ExecutionReport,
}

impl Run<'_> {
    fn audit(&self, id: &Identity, states: &[TermState], filters: &[Filter], handed: &[Filter]) -> Result<()> {
        for s in states {
            if !s.rel.mass_ok() {
                return Err(Error::Internal(format!("mass law fails for {:?}", s.term)));
            }
        }
        let Some(body) = &self.body else {
            return Ok(());
        };
        let l = id.targets.len();
        for t in body {
            if !filters.iter().all(|f| f.admits(t)) || handed.iter().any(|f| f.admits(t)) {
                continue;
            }
            let prod: Rational = states.iter().map(|s| s.rel.value_at(t)).product();
            if !self.threshold.product_ok(&prod, l) {
                return Err(Error::Internal(format!(
                    "measure product {prod} below B^-{l} at {t:?}"
                )));
            }
        }
        Ok(())
    }

    fn split(&self, rel: &mut WeightedRelation) -> Filter {
        let mut over = HashSet::new();
        rel.rows.retain(|t, p| {
            let keep = self.threshold.keeps(p);
            if !keep {
                over.insert(t.clone());
            }
            keep
        });
        Filter {
            vars: rel.vars,
            rows: over,
        }
    }

    fn spawn(
        &mut self,
        base: &Identity,
        index: usize,
        states: &[TermState],
        overflow: Filter,
        filters: &[Filter],
        depth: usize,
    ) -> Result<()> {
        let res = proofmachine::reset_at(base, index)?;
        if res.identity.targets.is_empty() {
            self.report.dropped += overflow.rows.len();
            return Ok(());
        }
        let child_states: Vec<TermState> = states
            .iter()
            .enumerate()
            .filter(|(j, _)| !res.removed.contains(j))
            .map(|(_, s)| TermState {
                term: s.term,
                rel: s.rel.semijoin(&overflow),
            })
            .collect();
        let mut child_filters = filters.to_vec();
        child_filters.push(overflow);
        self.report.branches += 1;
        self.branch(res.identity, child_states, child_filters, depth + 1)
    }

    fn branch(&mut self, id: Identity, mut states: Vec<TermState>, filters: Vec<Filter>, depth: usize) -> Result<()> {
        if depth > self.depth_cap {
            return Err(Error::Internal("branch depth exceeds the identity size".into()));
        }
        let seq = proofmachine::construct_proof_sequence(&id)?;
        let mut handed: Vec<Filter> = Vec::new();
        self.audit(&id, &states, &filters, &handed)?;
        for stage in &seq.stages {
            if states.len() != stage.before.sources.len() {
                return Err(Error::Internal("measures out of step with sources".into()));
            }
            self.report.steps += stage.steps.len();
            match stage.mv {
                Move::Cancel { source, target } => {
                    let bag = stage.before.targets[target];
                    let mut rel = states[source].rel.clone();
                    let overflow = self.split(&mut rel);
                    self.out.entry(bag).or_default().extend(rel.rows.into_keys());
                    if !overflow.rows.is_empty() {
                        self.spawn(&stage.before, source, &states, overflow, &filters, depth)?;
                    }
                    return Ok(());
                }
                Move::Compose { source, cond } => {
                    let u = &states[source].rel;
                    let c = &states[cond].rel;
                    let w = states[source].term.ys;
                    let b = states[cond].term.ys;
                    let mut rel = compose(u, c, w, b);
                    let overflow = self.split(&mut rel);
                    let (hi, lo) = if source > cond { (source, cond) } else { (cond, source) };
                    states.remove(hi);
                    states.remove(lo);
                    self.report.max_intermediate = self.report.max_intermediate.max(rel.len());
                    states.push(TermState {
                        term: Term::uncond(w | b),
                        rel,
                    });
                    if !overflow.rows.is_empty() {
                        let index = states.len() - 1;
                        self.spawn(&stage.after, index, &states, overflow.clone(), &filters, depth)?;
                        handed.push(overflow);
                    }
                }
                Move::Submod { source, .. } => {
                    let st = states.remove(source);
                    let produced: Vec<Term> = stage.after.sources[stage.after.sources.len() - stage.steps.len()..].to_vec();
                    let cond_term = *produced.last().expect("conditional term");
                    let a = cond_term.xs & st.term.ys;
                    if !a.is_empty() {
                        let marg = st.rel.marginal(a);
                        let mut cond = st.rel.clone();
                        let ap = positions(a, st.rel.vars);
                        for (t, p) in cond.rows.iter_mut() {
                            *p = &*p / &marg.rows[&pick(t, &ap)];
                        }
                        cond.keys = a;
                        states.push(TermState {
                            term: Term::uncond(a),
                            rel: marg,
                        });
                        states.push(TermState {
                            term: cond_term,
                            rel: cond,
                        });
                    } else {
                        states.push(TermState {
                            term: cond_term,
                            rel: st.rel,
                        });
                    }
                }
                Move::Mono { source, witness } => {
                    let st = states.remove(source);
                    let crate::infobound::Basic::Mono { small, .. } = stage.before.witnesses[witness] else {
                        return Err(Error::Internal("monotonicity move on a submodularity".into()));
                    };
                    if !small.is_empty() {
                        states.push(TermState {
                            term: Term::uncond(small),
                            rel: st.rel.marginal(small),
                        });
                    }
                }
            }
            for s in &states {
                self.report.max_intermediate = self.report.max_intermediate.max(s.rel.len());
            }
            if states.iter().map(|s| s.term).ne(stage.after.sources.iter().copied()) {
                return Err(Error::Internal("measures out of step with sources".into()));
            }
            self.audit(&stage.after, &states, &filters, &handed)?;
        }
        Ok(())
    }
}

/// `p_W(w) · p_{B|K}(b | w_K)` over `W ∪ B`.
fn compose(u: &WeightedRelation, c: &WeightedRelation, w: VarSet, b: VarSet) -> WeightedRelation {
    let key_in_u = positions(c.keys, w);
    let key_in_c = positions(c.keys, c.vars);
    let ys_in_c = positions(b, c.vars);
    let mut index: HashMap<Tuple, Vec<(Tuple, &Rational)>> = HashMap::new();
    for (t, p) in &c.rows {
        index.entry(pick(t, &key_in_c)).or_default().push((pick(t, &ys_in_c), p));
    }
    let all = w | b;
    // for each output variable: (from u?, position)
    let plan: Vec<(bool, usize)> = all
        .iter()
        .map(|i| {
            if w.contains(i) {
                (true, positions(VarSet::singleton(i), w)[0])
            } else {
                (false, positions(VarSet::singleton(i), b)[0])
            }
        })
        .collect();
    let mut rows = BTreeMap::new();
    for (tu, pu) in &u.rows {
        let Some(ext) = index.get(&pick(tu, &key_in_u)) else {
            continue;
        };
        for (tb, pb) in ext {
            let t: Tuple = plan
                .iter()
                .map(|&(from_u, p)| if from_u { tu[p].clone() } else { tb[p].clone() })
                .collect();
            rows.insert(t, pu * *pb);
        }
    }
    WeightedRelation {
        vars: all,
        keys: VarSet::EMPTY,
        rows,
    }
}

fn exec_n(db: &Database, s: &StatisticsSet, cfg: &ExecConfig) -> Result<BigUint> {
    match (&cfg.n_exec, &s.mode) {
        (Some(n), _) => Ok(n.clone()),
        (None, StatsMode::Symbolic) => qmodel::least_symbolic_n(db, s),
        (None, StatsMode::Numeric { n }) => Ok(n.clone()),
    }
}

fn atom_sets(q: &ConjunctiveQuery, db: &Database) -> Result<Vec<(VarSet, BTreeSet<Tuple>)>> {
    (0..q.atoms.len())
        .map(|i| Ok((q.atom_set(i), atom_projection(q, db, i, q.atom_set(i))?)))
        .collect()
}

/// Keeps the tuples of a bag relation whose projections satisfy every
/// atom the bag covers.
fn filter_by_atoms(bag: VarSet, rows: BTreeSet<Tuple>, atoms: &[(VarSet, BTreeSet<Tuple>)]) -> BTreeSet<Tuple> {
    let checks: Vec<(Vec<usize>, &BTreeSet<Tuple>)> = atoms
        .iter()
        .filter(|(a, _)| a.is_subset(bag))
        .map(|(a, rel)| (positions(*a, bag), rel))
        .collect();
    rows.into_iter()
        .filter(|t| checks.iter().all(|(pos, rel)| rel.contains(&pick(t, pos))))
        .collect()
}

fn bag_relation(q: &ConjunctiveQuery, bag: VarSet, rows: BTreeSet<Tuple>) -> Result<Relation> {
    Relation::from_tuples(Schema::new(q.vars_of(bag))?, rows)
}

/// Runs the rule with the given head bags and body `q`'s atoms, guided by
/// `flow`. Every body tuple ends up with its projection in some head's
/// output.
pub fn evaluate_ddr(
    q: &ConjunctiveQuery,
    bags: &[VarSet],
    s: &StatisticsSet,
    db: &Database,
    flow: &ShannonFlow,
    cfg: &ExecConfig,
) -> Result<DdrOutput> {
    flow.check_identity()?;
    let heads: BTreeSet<VarSet> = bags.iter().copied().collect();
    if let Some((b, _)) = flow.targets.iter().find(|(b, l)| !l.is_zero() && !heads.contains(b)) {
        return Err(Error::Certificate(format!("flow target {b:?} is not a head bag")));
    }
    let n = exec_n(db, s, cfg)?;
    let threshold = bound_from_flow(flow, s, &n)?;
    let (id, _) = proofmachine::to_integral(flow)?;
    let states = id
        .sources
        .iter()
        .map(|t| init_state(q, db, flow, *t))
        .collect::<Result<Vec<_>>>()?;
    let body = if cfg.audit {
        let rows = oracle::body_join(q, db)?;
        (rows.len() <= AUDIT_LIMIT).then_some(rows)
    } else {
        None
    };
    let mut run = Run {
        q,
        depth_cap: id.sources.len() + id.witnesses.len(),
        report: ExecutionReport {
            log_bound: threshold.log_value.clone(),
            bound: threshold.to_f64(),
            bound_ceil: threshold.ceil(),
            audited: body.is_some(),
            ..Default::default()
        },
        threshold,
        body,
        out: BTreeMap::new(),
    };
    run.branch(id, states, Vec::new(), 0)?;
    let atoms = atom_sets(q, db)?;
    let mut outputs = BTreeMap::new();
    for b in heads {
        let emitted = run.out.remove(&b).unwrap_or_default();
        run.report.emitted_sizes.push((b, emitted.len()));
        let rows = filter_by_atoms(b, emitted, &atoms);
        run.report.output_sizes.push((b, rows.len()));
        outputs.insert(b, bag_relation(run.q, b, rows)?);
    }
    Ok(DdrOutput {
        outputs,
        report: run.report,
    })
}

#[derive(Clone, Debug, Default)]
pub struct PlanReport {
    /// One entry per evaluated rule: its head bags and execution report.
    pub rules: Vec<(Vec<VarSet>, ExecutionReport)>,
    pub bag_sizes: Vec<(VarSet, usize)>,
    pub peak_intermediate: usize,
    /// Adaptive evaluation fell back to a single decomposition.
    pub static_fallback: bool,
}

fn flow_of(ctx: &BoundContext, bags: &[VarSet]) -> Result<ShannonFlow> {
    let b = infobound::ddr_bound(ctx, bags)?;
    match (b.value, b.flow) {
        (Extended::Finite(_), Some(f)) => Ok(f),
        _ => Err(Error::Unbounded(format!(
            "no finite bound for bags {}",
            bags.iter().map(|b| ctx.render_set(*b)).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn join_over(
    q: &ConjunctiveQuery,
    td: &TreeDecomposition,
    bags: &BTreeMap<VarSet, BTreeSet<Tuple>>,
    report: &mut PlanReport,
) -> Result<Relation> {
    let rels = td
        .bags
        .iter()
        .map(|b| bag_relation(q, *b, bags.get(b).cloned().unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    let tree = JoinTree {
        bags: rels,
        edges: td.edges.clone(),
    };
    let (r, stats) = relcore::yannakakis_instrumented(&tree, &q.head)?;
    report.peak_intermediate = report.peak_intermediate.max(stats.peak_intermediate);
    Ok(r)
}

/// Certificates for one rule per bag of a decomposition. They depend on
/// the query and statistics only, so one plan serves many databases.
#[derive(Clone, Debug)]
pub struct StaticPlan {
    pub td: TreeDecomposition,
    pub flows: Vec<ShannonFlow>,
}

impl StaticPlan {
    pub fn new(q: &ConjunctiveQuery, s: &StatisticsSet, td: &TreeDecomposition) -> Result<Self> {
        td.check(q)?;
        let ctx = BoundContext::new(q, s)?;
        let flows = td
            .bags
            .par_iter()
            .map(|b| flow_of(&ctx, &[*b]))
            .collect::<Result<Vec<_>>>()?;
        Ok(StaticPlan { td: td.clone(), flows })
    }

    /// The plan over the decomposition with the least `fhtw` cost.
    pub fn best(q: &ConjunctiveQuery, s: &StatisticsSet) -> Result<Self> {
        let rep = infobound::fhtw(q, s)?;
        Self::new(q, s, &rep.tds[rep.best])
    }

    pub fn execute(
        &self,
        q: &ConjunctiveQuery,
        s: &StatisticsSet,
        db: &Database,
        cfg: &ExecConfig,
    ) -> Result<(Relation, PlanReport)> {
        let runs = self
            .td
            .bags
            .par_iter()
            .zip(&self.flows)
            .map(|(b, flow)| evaluate_ddr(q, &[*b], s, db, flow, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut report = PlanReport::default();
        let mut bags = BTreeMap::new();
        for (b, run) in self.td.bags.iter().zip(runs) {
            let rel = &run.outputs[b];
            report.bag_sizes.push((*b, rel.len()));
            report.rules.push((vec![*b], run.report));
            bags.insert(*b, rel.tuples().clone());
        }
        let out = join_over(q, &self.td, &bags, &mut report)?;
        Ok((out, report))
    }
}

/// Certificates for one rule per bag selector over the minimal nontrivial
/// decompositions, or a static plan when fewer than two exist.
#[derive(Clone, Debug)]
pub enum AdaptivePlan {
    Selectors {
        tds: Vec<TreeDecomposition>,
        rules: Vec<(Vec<VarSet>, ShannonFlow)>,
    },
    Fallback(StaticPlan),
}

impl AdaptivePlan {
    pub fn new(q: &ConjunctiveQuery, s: &StatisticsSet) -> Result<Self> {
        let tds = hypergraph::enumerate_tds(q)?;
        let nontrivial: Vec<TreeDecomposition> = hypergraph::width_tds(&tds)
            .into_iter()
            .filter(|t| !t.is_trivial())
            .collect();
        let ctx = BoundContext::new(q, s)?;
        if nontrivial.len() < 2 {
            let rep = infobound::fhtw_over(&ctx, tds)?;
            return Ok(AdaptivePlan::Fallback(StaticPlan::new(q, s, &rep.tds[rep.best])?));
        }
        let rules = hypergraph::bag_selectors(&nontrivial, false)
            .par_iter()
            .map(|sel| {
                let heads = sel.heads();
                flow_of(&ctx, &heads).map(|f| (heads, f))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AdaptivePlan::Selectors { tds: nontrivial, rules })
    }

    pub fn execute(
        &self,
        q: &ConjunctiveQuery,
        s: &StatisticsSet,
        db: &Database,
        cfg: &ExecConfig,
    ) -> Result<(Relation, PlanReport)> {
        let (tds, rules) = match self {
            AdaptivePlan::Fallback(p) => {
                let (r, mut report) = p.execute(q, s, db, cfg)?;
                report.static_fallback = true;
                return Ok((r, report));
            }
            AdaptivePlan::Selectors { tds, rules } => (tds, rules),
        };
        let runs = rules
            .par_iter()
            .map(|(heads, flow)| evaluate_ddr(q, heads, s, db, flow, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut report = PlanReport::default();
        let mut bags: BTreeMap<VarSet, BTreeSet<Tuple>> = BTreeMap::new();
        for ((heads, _), run) in rules.iter().zip(runs) {
            for (b, rel) in &run.outputs {
                bags.entry(*b).or_default().extend(rel.tuples().iter().cloned());
            }
            report.rules.push((heads.clone(), run.report));
        }
        report.bag_sizes = bags.iter().map(|(b, r)| (*b, r.len())).collect();
        let mut rows: BTreeSet<Tuple> = BTreeSet::new();
        for td in tds {
            rows.extend(join_over(q, td, &bags, &mut report)?.tuples().iter().cloned());
        }
        Ok((Relation::from_tuples(Schema::new(q.head.clone())?, rows)?, report))
    }
}

/// One rule per bag of `td`, then a Yannakakis pass over the bags.
pub fn evaluate_cq_static(
    q: &ConjunctiveQuery,
    s: &StatisticsSet,
    db: &Database,
    td: &TreeDecomposition,
    cfg: &ExecConfig,
) -> Result<(Relation, PlanReport)> {
    StaticPlan::new(q, s, td)?.execute(q, s, db, cfg)
}

/// One rule per bag selector; each bag collects the union of its outputs
/// and every nontrivial decomposition is joined over them.
pub fn evaluate_cq_adaptive(
    q: &ConjunctiveQuery,
    s: &StatisticsSet,
    db: &Database,
    cfg: &ExecConfig,
) -> Result<(Relation, PlanReport)> {
    AdaptivePlan::new(q, s)?.execute(q, s, db, cfg)
}
