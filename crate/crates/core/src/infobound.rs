//! Polymatroid bounds, widths and Shannon-flow certificates.
//!
//! All values are in `log_N` units. A bound on a set of bags is the optimum
//! of `max t` subject to `t <= h(B)` for every bag, the elemental Shannon
//! inequalities and one row per statistic. The optimal dual of that program
//! is read back as a Shannon-flow inequality
//! `Σ λ_B h(B) <= Σ w h(Y|X)` together with the basic inequalities that
//! prove it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hypergraph::{self, BagSelector, TreeDecomposition, MAX_VARS};
use crate::proofmachine::Term;
use crate::qmodel::{Bound, ConjunctiveQuery, ConstraintKind, StatisticsSet, StatsMode};
use crate::ratlp::{LinearProgram, LpStatus, Sense, VarBound};
use crate::relcore::Variable;
use crate::scalar::{f64_to_fixed_ratio, ratio_to_f64};
use crate::varset::VarSet;

pub type Rational = BigRational;

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Fractional bits kept when a natural-log ratio enters the LP.
pub const LOG_BITS: u32 = 64;

/// An LP optimum, or `Infinite` when the statistics leave it unbounded.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Extended {
    Finite(Rational),
    Infinite,
}

impl Extended {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(r) => Some(r),
            Extended::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(r) => ratio_to_f64(r),
            Extended::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(r) => write!(f, "{r}"),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

/// A basic Shannon inequality in `>= 0` form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basic {
    /// `h(big) - h(small) >= 0`, `small ⊆ big`; `small` may be empty.
    Mono { big: VarSet, small: VarSet },
    /// `h(AB) + h(AC) - h(A) - h(ABC) >= 0` with `A`, `B`, `C` disjoint,
    /// `B`, `C` non-empty and `B <= C`.
    Submod { a: VarSet, b: VarSet, c: VarSet },
}

impl Basic {
    pub fn submod(a: VarSet, b: VarSet, c: VarSet) -> Self {
        if b <= c {
            Basic::Submod { a, b, c }
        } else {
            Basic::Submod { a, b: c, c: b }
        }
    }

    pub fn mono(big: VarSet, small: VarSet) -> Self {
        Basic::Mono { big, small }
    }

    pub fn is_well_formed(&self) -> bool {
        match *self {
            Basic::Mono { big, small } => small.is_subset(big) && !big.is_empty(),
            Basic::Submod { a, b, c } => {
                !b.is_empty()
                    && !c.is_empty()
                    && a.is_disjoint(b)
                    && a.is_disjoint(c)
                    && b.is_disjoint(c)
                    && b <= c
            }
        }
    }

    /// Coefficients of the `>= 0` form; the empty-set coordinate is dropped.
    pub fn terms(&self) -> Vec<(VarSet, i64)> {
        let raw = match *self {
            Basic::Mono { big, small } => vec![(big, 1), (small, -1)],
            Basic::Submod { a, b, c } => vec![(a | b, 1), (a | c, 1), (a, -1), (a | b | c, -1)],
        };
        raw.into_iter().filter(|(s, _)| !s.is_empty()).collect()
    }

    pub fn render(&self, names: &[Variable]) -> String {
        let h = |s: VarSet| if s.is_empty() { "0".to_string() } else { format!("h({})", s.render(names)) };
        match *self {
            Basic::Mono { big, small } => format!("{} >= {}", h(big), h(small)),
            Basic::Submod { a, b, c } => format!(
                "{} + {} >= {} + {}",
                h(a | b),
                h(a | c),
                h(a | b | c),
                h(a)
            ),
        }
    }
}

/// The elemental inequalities over `n` variables: `h(V) >= h(V - i)` for
/// each `i`, and `h(Ab) + h(Ac) >= h(A) + h(Abc)` for each unordered pair
/// `b < c` and `A ⊆ V - {b, c}`.
pub fn polymatroid_constraints(n: usize) -> Result<Vec<Basic>> {
    if n == 0 || n > MAX_VARS {
        return Err(Error::Size(format!("{n} variables, supported range is 1..={MAX_VARS}")));
    }
    let all = VarSet::full(n);
    let mut out: Vec<Basic> = (0..n).map(|i| Basic::mono(all, all.without(i))).collect();
    for b in 0..n {
        for c in b + 1..n {
            let rest = all.without(b).without(c);
            for a in rest.subsets() {
                out.push(Basic::submod(a, VarSet::singleton(b), VarSet::singleton(c)));
            }
        }
    }
    Ok(out)
}

/// One statistic applied to one atom, as an LP row:
/// `h(XY) - h(X) <= rhs` for degrees and `h(X)/k + h(Y|X) <= rhs` for
/// ℓk norms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatRow {
    pub constraint: usize,
    pub atom: usize,
    pub xs: VarSet,
    pub ys: VarSet,
    pub kind: ConstraintKind,
    /// `log_N` of the stated bound (the k-th power for norms).
    pub log_bound: Rational,
    pub rhs: Rational,
}

impl StatRow {
    /// Terms of the row's left-hand side with their coefficients.
    pub fn terms(&self) -> Vec<(Term, Rational)> {
        let cond = (Term::new(self.ys, self.xs), Rational::one());
        match self.kind {
            ConstraintKind::Degree => vec![cond],
            ConstraintKind::Norm(_) if self.xs.is_empty() => vec![cond],
            ConstraintKind::Norm(k) => vec![
                (Term::new(self.xs, VarSet::EMPTY), Rational::new(1.into(), k.into())),
                cond,
            ],
        }
    }

    fn coeffs(&self) -> Vec<(VarSet, Rational)> {
        let mut out = Vec::new();
        for (t, c) in self.terms() {
            out.push((t.xs | t.ys, c.clone()));
            if !t.xs.is_empty() {
                out.push((t.xs, -c));
            }
        }
        out
    }
}

/// `log_N b` as an exact rational when `b` is a power of `n`, otherwise
/// rounded to [`LOG_BITS`] fractional bits.
pub fn log_ratio(b: &BigUint, n: &BigUint) -> Rational {
    if b.is_one() {
        return Rational::zero();
    }
    let mut p = n.clone();
    let mut e = 1i64;
    while &p < b {
        p *= n;
        e += 1;
    }
    if &p == b {
        return rat(e);
    }
    let ln = |x: &BigUint| {
        let f = x.to_f64().unwrap_or(f64::INFINITY);
        if f.is_finite() {
            f.ln()
        } else {
            let shift = x.bits().saturating_sub(60);
            (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
        }
    };
    f64_to_fixed_ratio(ln(b) / ln(n), LOG_BITS)
}

/// Everything the LPs of one query and statistics set share.
#[derive(Clone, Debug)]
pub struct BoundContext {
    pub n: usize,
    pub names: Vec<Variable>,
    pub rows: Vec<StatRow>,
    pub basics: Vec<Basic>,
}

impl BoundContext {
    pub fn new(q: &ConjunctiveQuery, s: &StatisticsSet) -> Result<Self> {
        let n = q.num_vars();
        let basics = polymatroid_constraints(n)?;
        let mut rows = Vec::new();
        for (ci, c) in s.constraints.iter().enumerate() {
            let log_bound = match (&s.mode, &c.bound) {
                (StatsMode::Symbolic, Bound::Power(e)) => e.clone(),
                (StatsMode::Numeric { n }, Bound::Count(b)) => {
                    if b.is_zero() {
                        return Err(Error::Semantic("bounds must be positive".into()));
                    }
                    log_ratio(b, n)
                }
                _ => return Err(Error::Mode("bound does not match the statistics mode".into())),
            };
            let rhs = match c.kind {
                ConstraintKind::Degree => log_bound.clone(),
                ConstraintKind::Norm(k) => log_bound.clone() / rat(k as i64),
            };
            for (atom, xs, ys) in c.instances(q)? {
                rows.push(StatRow {
                    constraint: ci,
                    atom,
                    xs,
                    ys,
                    kind: c.kind,
                    log_bound: log_bound.clone(),
                    rhs: rhs.clone(),
                });
            }
        }
        Ok(BoundContext {
            n,
            names: q.vars().to_vec(),
            rows,
            basics,
        })
    }

    pub fn render_set(&self, s: VarSet) -> String {
        s.render(&self.names)
    }
}

/// Values `h(S)` for every non-empty `S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntropyVector {
    pub n: usize,
    coords: Vec<Rational>,
}

impl EntropyVector {
    pub fn from_fn(n: usize, f: impl Fn(VarSet) -> Rational) -> Self {
        EntropyVector {
            n,
            coords: (1..1u32 << n).map(|m| f(VarSet::from_bits(m))).collect(),
        }
    }

    pub fn get(&self, s: VarSet) -> Rational {
        if s.is_empty() {
            Rational::zero()
        } else {
            self.coords[s.bits() as usize - 1].clone()
        }
    }

    pub fn satisfies(&self, b: &Basic) -> bool {
        let v: Rational = b.terms().into_iter().map(|(s, c)| self.get(s) * rat(c)).sum();
        !v.is_negative()
    }

    pub fn is_polymatroid(&self) -> bool {
        polymatroid_constraints(self.n).is_ok_and(|bs| bs.iter().all(|b| self.satisfies(b)))
    }

    pub fn render(&self, names: &[Variable]) -> String {
        let mut sets: Vec<VarSet> = (1..1u32 << self.n).map(VarSet::from_bits).collect();
        sets.sort_by_key(|s| (s.len(), *s));
        sets.iter()
            .map(|s| format!("h({})={}", s.render(names), self.get(*s)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `Σ λ_B h(B) <= Σ w · row` certified by `Σ μ · basic`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShannonFlow {
    pub targets: Vec<(VarSet, Rational)>,
    pub sources: Vec<(StatRow, Rational)>,
    pub witnesses: Vec<(Basic, Rational)>,
}

impl ShannonFlow {
    /// `Σ w · rhs`, the bound the inequality proves.
    pub fn value(&self) -> Rational {
        self.sources.iter().map(|(r, w)| r.rhs.clone() * w).sum()
    }

    /// Checks that `Σ λ h(B) + Σ μ basic = Σ w row` holds coordinate-wise
    /// and that all multipliers are non-negative.
    pub fn check_identity(&self) -> Result<()> {
        let mut acc: BTreeMap<VarSet, Rational> = BTreeMap::new();
        let mut add = |s: VarSet, c: Rational| {
            if !s.is_empty() {
                *acc.entry(s).or_insert_with(Rational::zero) += c;
            }
        };
        for (b, l) in &self.targets {
            if l.is_negative() {
                return Err(Error::Certificate("negative target weight".into()));
            }
            add(*b, l.clone());
        }
        for (b, mu) in &self.witnesses {
            if mu.is_negative() || !b.is_well_formed() {
                return Err(Error::Certificate(format!("bad witness {b:?} with multiplier {mu}")));
            }
            for (s, c) in b.terms() {
                add(s, mu.clone() * rat(c));
            }
        }
        for (r, w) in &self.sources {
            if w.is_negative() {
                return Err(Error::Certificate("negative source weight".into()));
            }
            for (s, c) in r.coeffs() {
                add(s, -(w.clone() * c));
            }
        }
        match acc.iter().find(|(_, c)| !c.is_zero()) {
            Some((s, c)) => Err(Error::Certificate(format!(
                "identity fails at coordinate {s:?} by {c}"
            ))),
            None => Ok(()),
        }
    }

    /// Source terms with their total coefficients, in canonical order.
    pub fn source_terms(&self) -> Vec<(Term, Rational)> {
        let mut acc: BTreeMap<Term, Rational> = BTreeMap::new();
        for (r, w) in &self.sources {
            for (t, c) in r.terms() {
                *acc.entry(t).or_insert_with(Rational::zero) += w.clone() * c;
            }
        }
        acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }

    pub fn render(&self, names: &[Variable]) -> String {
        let side = |items: Vec<(String, Rational)>| {
            if items.is_empty() {
                return "0".to_string();
            }
            items
                .into_iter()
                .map(|(t, c)| if c.is_one() { t } else { format!("{c}·{t}") })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        let lhs = side(
            self.targets
                .iter()
                .filter(|(_, l)| !l.is_zero())
                .map(|(b, l)| (format!("h({})", b.render(names)), l.clone()))
                .collect(),
        );
        let rhs = side(
            self.source_terms()
                .into_iter()
                .map(|(t, c)| (t.render(names), c))
                .collect(),
        );
        format!("{lhs} <= {rhs}")
    }
}

#[derive(Clone, Debug)]
pub struct DdrBound {
    pub bags: Vec<VarSet>,
    pub value: Extended,
    pub flow: Option<ShannonFlow>,
    pub witness: Option<EntropyVector>,
    pub pivots: usize,
}

fn coord(s: VarSet) -> usize {
    s.bits() as usize - 1
}

/// Every submodularity `h(AB) + h(AC) >= h(ABC) + h(A)` with `A`, `B`, `C`
/// disjoint and `B`, `C` non-empty, and every monotonicity, over `n`
/// variables.
pub fn all_basics(n: usize) -> Vec<Basic> {
    let full = VarSet::full(n);
    let mut out = Vec::new();
    for a in full.subsets() {
        let rest = full - a;
        for b in rest.subsets().filter(|b| !b.is_empty()) {
            for c in (rest - b).subsets().filter(|c| !c.is_empty() && b < *c) {
                out.push(Basic::submod(a, b, c));
            }
        }
    }
    for big in full.subsets().filter(|s| !s.is_empty()) {
        for small in big.subsets().filter(|s| *s != big) {
            out.push(Basic::mono(big, small));
        }
    }
    out
}

/// The same inequality with witnesses of least total multiplier, drawn from
/// [`all_basics`]. The simplex dual only uses elemental inequalities, so a
/// single general submodularity often replaces several of its witnesses and
/// the proof sequence gets shorter.
pub fn lighten(ctx: &BoundContext, flow: &ShannonFlow) -> Result<ShannonFlow> {
    let nh = (1usize << ctx.n) - 1;
    let basics = all_basics(ctx.n);
    let mut rhs = vec![Rational::zero(); nh];
    for (r, w) in &flow.sources {
        for (s, c) in r.coeffs() {
            if !s.is_empty() {
                rhs[coord(s)] += w.clone() * c;
            }
        }
    }
    for (b, l) in &flow.targets {
        rhs[coord(*b)] -= l.clone();
    }
    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); nh];
    for (j, b) in basics.iter().enumerate() {
        for (s, c) in b.terms() {
            rows[coord(s)].push((j, rat(c)));
        }
    }
    let mut lp: LinearProgram<Rational> = LinearProgram::new(basics.len());
    for j in 0..basics.len() {
        lp.set_objective(j, -Rational::one());
    }
    for (row, r) in rows.into_iter().zip(rhs) {
        lp.add_constraint(row, Sense::Eq, r);
    }
    let sol = lp.solve();
    if !sol.is_optimal() {
        return Err(Error::Certificate(format!("witness program is {}", sol.status)));
    }
    let out = ShannonFlow {
        targets: flow.targets.clone(),
        sources: flow.sources.clone(),
        witnesses: basics
            .into_iter()
            .zip(sol.primal)
            .filter(|(_, mu)| !mu.is_zero())
            .collect(),
    };
    out.check_identity()?;
    Ok(out)
}

/// `max min_B h(B)` over polymatroids satisfying the statistics, with the
/// certificate read from the optimal dual.
pub fn ddr_bound(ctx: &BoundContext, bags: &[VarSet]) -> Result<DdrBound> {
    let bags: Vec<VarSet> = bags.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if bags.is_empty() {
        return Err(Error::Argument("a rule needs at least one head bag".into()));
    }
    if bags.iter().any(|b| b.is_empty()) {
        return Err(Error::Argument("head bags must be non-empty".into()));
    }
    let nh = (1usize << ctx.n) - 1;
    let t = nh;
    let mut lp: LinearProgram<Rational> = LinearProgram::new(nh + 1);
    lp.set_bound(t, VarBound::Free);
    lp.set_objective(t, Rational::one());
    for b in &bags {
        lp.add_constraint([(t, Rational::one()), (coord(*b), -Rational::one())], Sense::Le, Rational::zero());
    }
    for r in &ctx.rows {
        lp.add_constraint(
            r.coeffs().into_iter().map(|(s, c)| (coord(s), c)),
            Sense::Le,
            r.rhs.clone(),
        );
    }
    for b in &ctx.basics {
        lp.add_constraint(
            b.terms().into_iter().map(|(s, c)| (coord(s), rat(-c))),
            Sense::Le,
            Rational::zero(),
        );
    }
    let sol = lp.solve();
    match sol.status {
        LpStatus::Unbounded => {
            return Ok(DdrBound {
                bags,
                value: Extended::Infinite,
                flow: None,
                witness: None,
                pivots: sol.pivots,
            })
        }
        LpStatus::Infeasible => {
            return Err(Error::Internal("polymatroid program is infeasible".into()))
        }
        LpStatus::Optimal => {}
    }
    sol.certify(&lp).map_err(Error::Internal)?;

    let nb = bags.len();
    let nr = ctx.rows.len();
    let y = &sol.dual;
    let targets: Vec<(VarSet, Rational)> = bags.iter().zip(&y[..nb]).map(|(b, l)| (*b, l.clone())).collect();
    let sources: Vec<(StatRow, Rational)> = ctx
        .rows
        .iter()
        .zip(&y[nb..nb + nr])
        .filter(|(_, w)| !w.is_zero())
        .map(|(r, w)| (r.clone(), w.clone()))
        .collect();
    let mut witnesses: Vec<(Basic, Rational)> = ctx
        .basics
        .iter()
        .zip(&y[nb + nr..])
        .filter(|(_, mu)| !mu.is_zero())
        .map(|(b, mu)| (*b, mu.clone()))
        .collect();
    // slack in the dual constraint of a non-negative h(S) is a multiple of h(S) >= 0
    let mut slack = vec![Rational::zero(); nh];
    for (i, c) in lp.constraints.iter().enumerate() {
        for (v, a) in &c.coeffs {
            if *v < nh {
                slack[*v] += a.clone() * y[i].clone();
            }
        }
    }
    for (j, s) in slack.into_iter().enumerate() {
        if s.is_positive() {
            witnesses.push((Basic::mono(VarSet::from_bits(j as u32 + 1), VarSet::EMPTY), s));
        }
    }
    let flow = ShannonFlow {
        targets,
        sources,
        witnesses,
    };
    flow.check_identity()?;
    if flow.value() != sol.value {
        return Err(Error::Internal("dual objective differs from the optimum".into()));
    }
    let witness = EntropyVector::from_fn(ctx.n, |s| sol.primal[coord(s)].clone());
    Ok(DdrBound {
        bags,
        value: Extended::Finite(sol.value),
        flow: Some(flow),
        witness: Some(witness),
        pivots: sol.pivots,
    })
}

/// `max h(target)` over polymatroids satisfying the statistics.
pub fn polymatroid_bound(ctx: &BoundContext, target: VarSet) -> Result<DdrBound> {
    ddr_bound(ctx, &[target])
}

#[derive(Clone, Debug)]
pub struct FhtwReport {
    pub value: Extended,
    pub best: usize,
    pub tds: Vec<TreeDecomposition>,
    /// Per decomposition: its cost and the bound of each bag.
    pub per_td: Vec<(Extended, Vec<(VarSet, Extended)>)>,
}

/// `min_T max_{B ∈ T} polymatroid_bound(B)` over the enumerated
/// decompositions; ties go to the earlier decomposition.
pub fn fhtw(q: &ConjunctiveQuery, s: &StatisticsSet) -> Result<FhtwReport> {
    let ctx = BoundContext::new(q, s)?;
    let tds = hypergraph::enumerate_tds(q)?;
    fhtw_over(&ctx, tds)
}

pub fn fhtw_over(ctx: &BoundContext, tds: Vec<TreeDecomposition>) -> Result<FhtwReport> {
    let bags: Vec<VarSet> = tds
        .iter()
        .flat_map(|t| t.bags.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let bounds: Vec<Extended> = bags
        .par_iter()
        .map(|b| polymatroid_bound(ctx, *b).map(|r| r.value))
        .collect::<Result<_>>()?;
    let lookup: BTreeMap<VarSet, Extended> = bags.into_iter().zip(bounds).collect();
    let per_td: Vec<(Extended, Vec<(VarSet, Extended)>)> = tds
        .iter()
        .map(|t| {
            let per: Vec<(VarSet, Extended)> = t.bags.iter().map(|b| (*b, lookup[b].clone())).collect();
            let cost = per.iter().map(|(_, v)| v.clone()).max().expect("non-empty td");
            (cost, per)
        })
        .collect();
    let (best, value) = per_td
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .map(|(i, (v, _))| (i, v.clone()))
        .ok_or_else(|| Error::Plan("no tree decompositions".into()))?;
    Ok(FhtwReport {
        value,
        best,
        tds,
        per_td,
    })
}

#[derive(Clone, Debug)]
pub struct SubwReport {
    pub value: Extended,
    pub tds: Vec<TreeDecomposition>,
    pub selectors: Vec<(BagSelector, DdrBound)>,
}

/// `max` over bag selectors of the rule bound.
pub fn subw(q: &ConjunctiveQuery, s: &StatisticsSet, prune: bool) -> Result<SubwReport> {
    let ctx = BoundContext::new(q, s)?;
    let tds = hypergraph::width_tds(&hypergraph::enumerate_tds(q)?);
    subw_over(&ctx, tds, prune)
}

pub fn subw_over(ctx: &BoundContext, tds: Vec<TreeDecomposition>, prune: bool) -> Result<SubwReport> {
    let sels = hypergraph::bag_selectors(&tds, prune);
    let bounds: Vec<DdrBound> = sels
        .par_iter()
        .map(|sel| ddr_bound(ctx, &sel.heads()))
        .collect::<Result<_>>()?;
    let value = bounds
        .iter()
        .map(|b| b.value.clone())
        .max()
        .ok_or_else(|| Error::Plan("no bag selectors".into()))?;
    Ok(SubwReport {
        value,
        tds,
        selectors: sels.into_iter().zip(bounds).collect(),
    })
}
