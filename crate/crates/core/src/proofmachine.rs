//! Integral Shannon-flow identities, proof sequences and the reset lemma.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::infobound::{Basic, ShannonFlow};
use crate::relcore::Variable;
use crate::varset::VarSet;

/// Largest number of unit terms an integral identity may carry.
pub const MAX_UNITS: usize = 4096;

/// `h(ys | xs)`; unconditional when `xs` is empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub ys: VarSet,
    pub xs: VarSet,
}

impl Term {
    pub fn new(ys: VarSet, xs: VarSet) -> Self {
        Term { ys: ys - xs, xs }
    }

    pub fn uncond(s: VarSet) -> Self {
        Term { ys: s, xs: VarSet::EMPTY }
    }

    pub fn is_unconditional(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn whole(&self) -> VarSet {
        self.xs | self.ys
    }

    pub fn render(&self, names: &[Variable]) -> String {
        if self.xs.is_empty() {
            format!("h({})", self.ys.render(names))
        } else {
            format!("h({}|{})", self.ys.render(names), self.xs.render(names))
        }
    }

    fn coeffs(&self) -> Vec<(VarSet, i64)> {
        let mut out = vec![(self.whole(), 1)];
        if !self.xs.is_empty() {
            out.push((self.xs, -1));
        }
        out
    }
}

/// `Σ h(B) + Σ basic = Σ source` with every term at unit weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Identity {
    pub targets: Vec<VarSet>,
    pub sources: Vec<Term>,
    pub witnesses: Vec<Basic>,
}

impl Identity {
    pub fn check(&self) -> Result<()> {
        let mut acc: BTreeMap<VarSet, i64> = BTreeMap::new();
        let mut add = |s: VarSet, c: i64| {
            if !s.is_empty() {
                *acc.entry(s).or_insert(0) += c;
            }
        };
        for t in &self.targets {
            add(*t, 1);
        }
        for w in &self.witnesses {
            if !w.is_well_formed() {
                return Err(Error::Certificate(format!("malformed witness {w:?}")));
            }
            for (s, c) in w.terms() {
                add(s, c);
            }
        }
        for t in &self.sources {
            if t.ys.is_empty() {
                return Err(Error::Certificate("empty source term".into()));
            }
            for (s, c) in t.coeffs() {
                add(s, -c);
            }
        }
        match acc.into_iter().find(|(_, c)| *c != 0) {
            Some((s, c)) => Err(Error::Certificate(format!("identity off by {c} at {s:?}"))),
            None => Ok(()),
        }
    }

    pub fn render(&self, names: &[Variable]) -> String {
        let join = |v: Vec<String>| if v.is_empty() { "0".to_string() } else { v.join(" + ") };
        let lhs = join(self.targets.iter().map(|t| Term::uncond(*t).render(names)).collect());
        let rhs = join(self.sources.iter().map(|t| t.render(names)).collect());
        format!("{lhs} <= {rhs}")
    }
}

fn lcm_denoms<'a>(it: impl Iterator<Item = &'a BigRational>) -> BigInt {
    it.fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

fn units(r: &BigRational, scale: &BigInt) -> Result<usize> {
    let v = r * BigRational::from_integer(scale.clone());
    debug_assert!(v.is_integer());
    v.to_integer()
        .to_usize()
        .filter(|u| *u <= MAX_UNITS)
        .ok_or_else(|| Error::Size(format!("weight {r} needs too many unit terms")))
}

/// Scales a flow by the least common denominator of its weights and
/// expands it into unit terms. Returns the identity and the scale.
pub fn to_integral(flow: &ShannonFlow) -> Result<(Identity, BigInt)> {
    let terms = flow.source_terms();
    let scale = lcm_denoms(
        flow.targets
            .iter()
            .map(|(_, l)| l)
            .chain(terms.iter().map(|(_, c)| c))
            .chain(flow.witnesses.iter().map(|(_, m)| m)),
    );
    let mut id = Identity {
        targets: Vec::new(),
        sources: Vec::new(),
        witnesses: Vec::new(),
    };
    for (b, l) in &flow.targets {
        if !l.is_zero() {
            id.targets.extend(std::iter::repeat_n(*b, units(l, &scale)?));
        }
    }
    for (t, c) in &terms {
        id.sources.extend(std::iter::repeat_n(*t, units(c, &scale)?));
    }
    for (w, m) in &flow.witnesses {
        id.witnesses.extend(std::iter::repeat_n(*w, units(m, &scale)?));
    }
    if id.targets.len() + id.sources.len() + id.witnesses.len() > MAX_UNITS {
        return Err(Error::Size("integral identity is too large".into()));
    }
    id.check()?;
    Ok((id, scale))
}

/// One rewriting of the source multiset by a valid Shannon inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProofStep {
    /// `h(whole) -> h(part) + h(whole - part | part)`
    Decompose { whole: VarSet, part: VarSet },
    /// `h(cond) + h(ys | cond) -> h(cond ∪ ys)`
    Compose { cond: VarSet, ys: VarSet },
    /// `h(big) -> h(small)`
    Monotone { big: VarSet, small: VarSet },
    /// `h(ys | xs) -> h(ys | xs ∪ extra)`
    Submod { ys: VarSet, xs: VarSet, extra: VarSet },
}

impl ProofStep {
    pub fn consumes(&self) -> Vec<Term> {
        match *self {
            ProofStep::Decompose { whole, .. } => vec![Term::uncond(whole)],
            ProofStep::Compose { cond, ys } => vec![Term::uncond(cond), Term::new(ys, cond)],
            ProofStep::Monotone { big, .. } => vec![Term::uncond(big)],
            ProofStep::Submod { ys, xs, .. } => vec![Term::new(ys, xs)],
        }
    }

    pub fn produces(&self) -> Vec<Term> {
        match *self {
            ProofStep::Decompose { whole, part } => {
                let mut v = vec![Term::new(whole - part, part)];
                if !part.is_empty() {
                    v.insert(0, Term::uncond(part));
                }
                v
            }
            ProofStep::Compose { cond, ys } => vec![Term::uncond(cond | ys)],
            ProofStep::Monotone { small, .. } if small.is_empty() => vec![],
            ProofStep::Monotone { small, .. } => vec![Term::uncond(small)],
            ProofStep::Submod { ys, xs, extra } => vec![Term::new(ys, xs | extra)],
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            ProofStep::Decompose { whole, part } => part.is_subset(whole) && part != whole,
            ProofStep::Compose { cond, ys } => !ys.is_empty() && cond.is_disjoint(ys),
            ProofStep::Monotone { big, small } => small.is_subset(big) && !big.is_empty(),
            ProofStep::Submod { ys, xs, extra } => !ys.is_empty() && ys.is_disjoint(xs) && ys.is_disjoint(extra),
        }
    }

    pub fn render(&self, names: &[Variable]) -> String {
        let side = |ts: Vec<Term>| {
            if ts.is_empty() {
                "0".to_string()
            } else {
                ts.iter().map(|t| t.render(names)).collect::<Vec<_>>().join(" + ")
            }
        };
        format!("{} -> {}", side(self.consumes()), side(self.produces()))
    }
}

/// A candidate rewriting that removes one unconditional source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Cancel { source: usize, target: usize },
    Compose { source: usize, cond: usize },
    Submod { source: usize, witness: usize },
    Mono { source: usize, witness: usize },
}

impl Move {
    pub fn source(&self) -> usize {
        match *self {
            Move::Cancel { source, .. }
            | Move::Compose { source, .. }
            | Move::Submod { source, .. }
            | Move::Mono { source, .. } => source,
        }
    }
}

/// All applicable moves, cancellations first, then compositions,
/// submodularities and monotonicities; within a class by source term.
pub fn candidate_moves(id: &Identity) -> Vec<Move> {
    let mut order: Vec<usize> = (0..id.sources.len()).filter(|&i| id.sources[i].is_unconditional()).collect();
    order.sort_by_key(|&i| (id.sources[i], i));
    let mut classes: [Vec<Move>; 4] = Default::default();
    for &i in &order {
        let w = id.sources[i].ys;
        if let Some(t) = id.targets.iter().position(|t| *t == w) {
            classes[0].push(Move::Cancel { source: i, target: t });
        }
        for (j, s) in id.sources.iter().enumerate() {
            if !s.is_unconditional() && s.xs == w {
                classes[1].push(Move::Compose { source: i, cond: j });
            }
        }
        for (j, b) in id.witnesses.iter().enumerate() {
            match *b {
                Basic::Submod { a, b, c } if a | b == w || a | c == w => {
                    classes[2].push(Move::Submod { source: i, witness: j })
                }
                Basic::Mono { big, .. } if big == w => classes[3].push(Move::Mono { source: i, witness: j }),
                _ => {}
            }
        }
    }
    classes.into_iter().flatten().collect()
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub mv: Move,
    pub steps: Vec<ProofStep>,
    /// Target finished by this stage.
    pub cancelled: Option<VarSet>,
    /// Unconditional term the stage created by composition.
    pub composed: Option<VarSet>,
    pub before: Identity,
    pub after: Identity,
}

#[derive(Clone, Debug)]
pub struct ProofSequence {
    pub initial: Identity,
    pub stages: Vec<Stage>,
}

impl ProofSequence {
    pub fn steps(&self) -> Vec<ProofStep> {
        self.stages.iter().flat_map(|s| s.steps.iter().copied()).collect()
    }

    pub fn render(&self, names: &[Variable]) -> String {
        self.steps()
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{:>3}. {}", i + 1, s.render(names)))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The next identity, the steps taken, and the cancelled and composed terms.
type Applied = (Identity, Vec<ProofStep>, Option<VarSet>, Option<VarSet>);

fn apply(id: &Identity, mv: Move) -> Result<Applied> {
    let mut next = id.clone();
    let w = id.sources[mv.source()].ys;
    let mut steps = Vec::new();
    let mut cancelled = None;
    let mut composed = None;
    match mv {
        Move::Cancel { source, target } => {
            next.targets.remove(target);
            next.sources.remove(source);
            cancelled = Some(w);
        }
        Move::Compose { source, cond } => {
            let ys = id.sources[cond].ys;
            let (hi, lo) = if source > cond { (source, cond) } else { (cond, source) };
            next.sources.remove(hi);
            next.sources.remove(lo);
            next.sources.push(Term::uncond(w | ys));
            steps.push(ProofStep::Compose { cond: w, ys });
            composed = Some(w | ys);
        }
        Move::Submod { source, witness } => {
            let Basic::Submod { a, b, c } = id.witnesses[witness] else {
                return Err(Error::Internal("submod move on a monotonicity".into()));
            };
            let (ys, extra) = if a | b == w { (b, c) } else { (c, b) };
            next.sources.remove(source);
            next.witnesses.remove(witness);
            if !a.is_empty() {
                steps.push(ProofStep::Decompose { whole: w, part: a });
                next.sources.push(Term::uncond(a));
            }
            steps.push(ProofStep::Submod { ys, xs: a, extra });
            next.sources.push(Term::new(ys, a | extra));
        }
        Move::Mono { source, witness } => {
            let Basic::Mono { big, small } = id.witnesses[witness] else {
                return Err(Error::Internal("monotonicity move on a submodularity".into()));
            };
            next.sources.remove(source);
            next.witnesses.remove(witness);
            steps.push(ProofStep::Monotone { big, small });
            if !small.is_empty() {
                next.sources.push(Term::uncond(small));
            }
        }
    }
    Ok((next, steps, cancelled, composed))
}

pub fn construct_proof_sequence(id: &Identity) -> Result<ProofSequence> {
    construct_proof_sequence_with(id, |_, _| 0)
}

/// Builds a proof sequence, letting `choose` pick among the candidate
/// moves of each stage.
pub fn construct_proof_sequence_with(
    id: &Identity,
    mut choose: impl FnMut(&Identity, &[Move]) -> usize,
) -> Result<ProofSequence> {
    id.check()?;
    let limit = 4 * (id.targets.len() + id.sources.len() + id.witnesses.len()) + 4;
    let mut cur = id.clone();
    let mut stages = Vec::new();
    while !cur.targets.is_empty() {
        let moves = candidate_moves(&cur);
        if moves.is_empty() {
            return Err(Error::Certificate("no unconditional source can be cancelled".into()));
        }
        let pick = choose(&cur, &moves);
        let mv = *moves
            .get(pick)
            .ok_or_else(|| Error::Argument(format!("move {pick} out of range")))?;
        let (next, steps, cancelled, composed) = apply(&cur, mv)?;
        debug_assert!(next.check().is_ok());
        stages.push(Stage {
            mv,
            steps,
            cancelled,
            composed,
            before: cur,
            after: next.clone(),
        });
        cur = next;
        if stages.len() > limit {
            return Err(Error::Internal("proof sequence does not terminate".into()));
        }
    }
    Ok(ProofSequence {
        initial: id.clone(),
        stages,
    })
}

fn move_class(m: &Move) -> u8 {
    match m {
        Move::Cancel { .. } => 0,
        Move::Compose { .. } => 1,
        Move::Submod { .. } => 2,
        Move::Mono { .. } => 3,
    }
}

/// The sequence with the fewest steps among those that pick, at every
/// stage, some move of the highest-priority class available. At most
/// `budget` stages are expanded; the best sequence found so far is returned
/// when the budget runs out.
pub fn construct_shortest_proof_sequence(id: &Identity, budget: usize) -> Result<ProofSequence> {
    struct Search {
        budget: usize,
        limit: usize,
        best: Option<(usize, Vec<Stage>)>,
    }
    fn go(sr: &mut Search, cur: &Identity, stages: &mut Vec<Stage>, count: usize) -> Result<()> {
        if sr.best.as_ref().is_some_and(|(b, _)| count >= *b) {
            return Ok(());
        }
        if cur.targets.is_empty() {
            sr.best = Some((count, stages.clone()));
            return Ok(());
        }
        if sr.budget == 0 || stages.len() > sr.limit {
            return Ok(());
        }
        let moves = candidate_moves(cur);
        let Some(top) = moves.first().map(move_class) else {
            return Ok(());
        };
        for mv in moves.into_iter().filter(|m| move_class(m) == top) {
            if sr.budget == 0 {
                break;
            }
            sr.budget -= 1;
            let (next, steps, cancelled, composed) = apply(cur, mv)?;
            let n = steps.len();
            stages.push(Stage {
                mv,
                steps,
                cancelled,
                composed,
                before: cur.clone(),
                after: next.clone(),
            });
            go(sr, &next, stages, count + n)?;
            stages.pop();
        }
        Ok(())
    }
    id.check()?;
    let mut sr = Search {
        budget,
        limit: 4 * (id.targets.len() + id.sources.len() + id.witnesses.len()) + 4,
        best: None,
    };
    go(&mut sr, id, &mut Vec::new(), 0)?;
    match sr.best {
        Some((_, stages)) => Ok(ProofSequence {
            initial: id.clone(),
            stages,
        }),
        None => construct_proof_sequence(id),
    }
}

/// Replays the steps on the initial sources; every step must be a valid
/// inequality consuming terms present, and the final multiset must contain
/// the targets. Leftover terms are conditional entropies, hence
/// non-negative.
pub fn verify(initial: &Identity, steps: &[ProofStep]) -> Result<()> {
    let mut bag: BTreeMap<Term, usize> = BTreeMap::new();
    for t in &initial.sources {
        *bag.entry(*t).or_insert(0) += 1;
    }
    for (i, s) in steps.iter().enumerate() {
        if !s.is_valid() {
            return Err(Error::Certificate(format!("step {} is not a Shannon inequality", i + 1)));
        }
        for t in s.consumes() {
            match bag.get_mut(&t) {
                Some(c) if *c > 0 => *c -= 1,
                _ => return Err(Error::Certificate(format!("step {} consumes a missing term", i + 1))),
            }
        }
        for t in s.produces() {
            *bag.entry(t).or_insert(0) += 1;
        }
    }
    for t in &initial.targets {
        match bag.get_mut(&Term::uncond(*t)) {
            Some(c) if *c > 0 => *c -= 1,
            _ => return Err(Error::Certificate("a target is not produced".into())),
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ResetResult {
    pub identity: Identity,
    pub lost_target: Option<VarSet>,
    /// Indices into the original sources that were removed, ascending.
    /// The surviving sources keep their relative order.
    pub removed: Vec<usize>,
}

/// Removes one copy of the unconditional source `h(drop)` and repairs the
/// identity, giving up at most one target.
pub fn reset(id: &Identity, drop: VarSet) -> Result<ResetResult> {
    let i = id
        .sources
        .iter()
        .position(|s| *s == Term::uncond(drop))
        .ok_or_else(|| Error::Argument("reset of a term that is not a source".into()))?;
    reset_at(id, i)
}

/// [`reset`] for the unconditional source at a given index.
pub fn reset_at(id: &Identity, index: usize) -> Result<ResetResult> {
    let drop = match id.sources.get(index) {
        Some(t) if t.is_unconditional() => t.ys,
        _ => return Err(Error::Argument("reset needs an unconditional source".into())),
    };
    let mut alive = vec![true; id.sources.len()];
    alive[index] = false;
    let mut targets = id.targets.clone();
    let mut witnesses = id.witnesses.clone();
    let mut missing = drop;
    let mut lost_target = None;
    let mut guard = id.sources.len() + id.witnesses.len() + id.targets.len() + 1;
    while !missing.is_empty() {
        guard = guard
            .checked_sub(1)
            .ok_or_else(|| Error::Internal("reset does not terminate".into()))?;
        if let Some(i) = targets.iter().position(|t| *t == missing) {
            targets.remove(i);
            lost_target = Some(missing);
            break;
        }
        let sub = witnesses.iter().position(|w| {
            matches!(*w, Basic::Submod { a, b, c } if a | b == missing || a | c == missing)
        });
        if let Some(i) = sub {
            let Basic::Submod { a, b, c } = witnesses[i] else { unreachable!() };
            let other = if a | b == missing { a | c } else { a | b };
            witnesses[i] = Basic::mono(other, a);
            missing = a | b | c;
            continue;
        }
        let cond = (0..id.sources.len())
            .find(|&j| alive[j] && !id.sources[j].is_unconditional() && id.sources[j].xs == missing);
        if let Some(j) = cond {
            alive[j] = false;
            missing = missing | id.sources[j].ys;
            continue;
        }
        if let Some(i) = witnesses
            .iter()
            .position(|w| matches!(*w, Basic::Mono { big, .. } if big == missing))
        {
            let Basic::Mono { small, .. } = witnesses.remove(i) else { unreachable!() };
            missing = small;
            continue;
        }
        return Err(Error::Certificate("reset found no term to absorb the loss".into()));
    }
    let next = Identity {
        targets,
        sources: (0..id.sources.len()).filter(|&j| alive[j]).map(|j| id.sources[j]).collect(),
        witnesses,
    };
    next.check()?;
    Ok(ResetResult {
        identity: next,
        lost_target,
        removed: (0..alive.len()).filter(|&j| !alive[j]).collect(),
    })
}
