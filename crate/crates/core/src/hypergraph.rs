//! Acyclicity, tree decompositions, bag selectors and disjunctive rules.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::qmodel::{ConjunctiveQuery, DisjunctiveRule};
use crate::varset::VarSet;

/// Largest query handled by decomposition and bound computations.
pub const MAX_VARS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    pub num_vertices: usize,
    pub edges: Vec<VarSet>,
}

impl Hypergraph {
    pub fn of_query(q: &ConjunctiveQuery) -> Self {
        Hypergraph {
            num_vertices: q.num_vars(),
            edges: (0..q.atoms.len()).map(|i| q.atom_set(i)).collect(),
        }
    }
}

/// GYO ear removal. On success returns the join tree as `(child, parent)`
/// pairs over edge indices.
pub fn gyo_acyclic(h: &Hypergraph) -> (bool, Option<Vec<(usize, usize)>>) {
    gyo(&h.edges)
}

fn gyo(edges: &[VarSet]) -> (bool, Option<Vec<(usize, usize)>>) {
    let m = edges.len();
    let mut cur = edges.to_vec();
    let mut live = vec![true; m];
    let mut tree = Vec::new();
    loop {
        let mut counts = [0u32; 32];
        for e in (0..m).filter(|&e| live[e]) {
            for v in cur[e].iter() {
                counts[v] += 1;
            }
        }
        for e in (0..m).filter(|&e| live[e]) {
            let lonely = VarSet::from_indices(cur[e].iter().filter(|&v| counts[v] == 1));
            cur[e] = cur[e] - lonely;
        }
        let ear = (0..m).filter(|&e| live[e]).find_map(|e| {
            (0..m)
                .filter(|&f| f != e && live[f])
                .find(|&f| cur[e].is_subset(cur[f]))
                .map(|f| (e, f))
        });
        match ear {
            Some((e, f)) => {
                live[e] = false;
                tree.push((e, f));
            }
            None => break,
        }
    }
    if live.iter().filter(|l| **l).count() <= 1 {
        (true, Some(tree))
    } else {
        (false, None)
    }
}

pub fn is_acyclic(edges: &[VarSet]) -> bool {
    gyo(edges).0
}

/// Bags in canonical (sorted) order and tree edges between bag indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeDecomposition {
    pub bags: Vec<VarSet>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// Canonicalizes `bags` (drops subsumed bags, sorts) and links them with
    /// a join tree. `None` if the bags are not acyclic.
    pub fn from_bags(bags: &[VarSet]) -> Option<Self> {
        let bags = maximal(bags);
        let (ok, tree) = gyo(&bags);
        if !ok {
            return None;
        }
        let mut edges: Vec<(usize, usize)> = tree
            .expect("acyclic")
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        Some(TreeDecomposition { bags, edges })
    }

    pub fn trivial(q: &ConjunctiveQuery) -> Self {
        TreeDecomposition {
            bags: vec![q.all_set()],
            edges: Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.bags.len() == 1
    }

    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let names: Vec<String> = self.bags.iter().map(|b| q.render_set(*b)).collect();
        format!("{{{}}}", names.join(", "))
    }

    /// Covering, running intersection and acyclicity.
    pub fn check(&self, q: &ConjunctiveQuery) -> Result<()> {
        for i in 0..q.atoms.len() {
            let a = q.atom_set(i);
            if !self.bags.iter().any(|b| a.is_subset(*b)) {
                return Err(Error::Plan(format!("atom {} not covered", q.atoms[i])));
            }
        }
        let n = self.bags.len();
        if self.edges.len() + 1 != n {
            return Err(Error::Plan("bag tree has the wrong number of edges".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let universe = self.bags.iter().fold(VarSet::EMPTY, |acc, b| acc | *b);
        for v in universe.iter() {
            let holders: Vec<usize> = (0..n).filter(|&i| self.bags[i].contains(v)).collect();
            let mut seen = HashSet::from([holders[0]]);
            let mut stack = vec![holders[0]];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if self.bags[w].contains(v) && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            if seen.len() != holders.len() {
                return Err(Error::Plan(format!(
                    "running intersection fails for {}",
                    q.vars()[v]
                )));
            }
        }
        let mut all_seen = HashSet::from([0]);
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if all_seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        if all_seen.len() != n {
            return Err(Error::Plan("bag tree is disconnected".into()));
        }
        if !is_acyclic(&self.bags) {
            return Err(Error::Plan("bags are not acyclic".into()));
        }
        Ok(())
    }
}

fn maximal(bags: &[VarSet]) -> Vec<VarSet> {
    let set: BTreeSet<VarSet> = bags.iter().copied().collect();
    set.iter()
        .filter(|b| !set.iter().any(|c| c != *b && b.is_subset(*c)))
        .copied()
        .collect()
}

/// True iff the bags stay acyclic after adding `free` as one more edge.
pub fn td_is_free_connex(td: &TreeDecomposition, free: VarSet) -> bool {
    if free.is_empty() {
        return is_acyclic(&td.bags);
    }
    let mut edges = td.bags.clone();
    edges.push(free);
    is_acyclic(&edges)
}

fn primal_adjacency(q: &ConjunctiveQuery) -> Vec<VarSet> {
    let mut adj = vec![VarSet::EMPTY; q.num_vars()];
    for i in 0..q.atoms.len() {
        let a = q.atom_set(i);
        for v in a.iter() {
            adj[v] = adj[v] | a.without(v);
        }
    }
    adj
}

/// `v` plus every uneliminated vertex reachable from `v` through
/// eliminated ones.
fn elimination_bag(adj: &[VarSet], eliminated: VarSet, v: usize) -> VarSet {
    let mut bag = VarSet::singleton(v);
    let mut visited = VarSet::singleton(v);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for w in adj[u].iter() {
            if visited.contains(w) {
                continue;
            }
            visited = visited.with(w);
            if eliminated.contains(w) {
                stack.push(w);
            } else {
                bag = bag.with(w);
            }
        }
    }
    bag
}

/// Free-connex tree decompositions generated by variable elimination
/// orders, plus the single-bag decomposition. Decompositions with several
/// bags come first in canonical order; the single-bag one is last.
pub fn enumerate_tds(q: &ConjunctiveQuery) -> Result<Vec<TreeDecomposition>> {
    let n = q.num_vars();
    if n > MAX_VARS {
        return Err(Error::Size(format!(
            "{n} variables, decompositions support at most {MAX_VARS}"
        )));
    }
    let adj = primal_adjacency(q);
    let all = q.all_set();
    let mut seen_states: HashSet<(VarSet, Vec<VarSet>)> = HashSet::new();
    let mut finals: BTreeSet<Vec<VarSet>> = BTreeSet::new();
    let mut stack = vec![(VarSet::EMPTY, Vec::<VarSet>::new())];
    while let Some((elim, bags)) = stack.pop() {
        if elim == all {
            finals.insert(bags);
            continue;
        }
        for v in (all - elim).iter() {
            let mut next = bags.clone();
            next.push(elimination_bag(&adj, elim, v));
            let next = maximal(&next);
            let state = (elim.with(v), next);
            if seen_states.insert(state.clone()) {
                stack.push(state);
            }
        }
    }
    let free = q.free_set();
    let trivial = TreeDecomposition::trivial(q);
    let mut out: Vec<TreeDecomposition> = finals
        .iter()
        .filter_map(|b| TreeDecomposition::from_bags(b))
        .filter(|td| !td.is_trivial())
        .filter(|td| td_is_free_connex(td, free))
        .collect();
    out.sort_by(|a, b| a.bags.cmp(&b.bags));
    out.dedup();
    out.push(trivial);
    Ok(out)
}

/// `a` refines `b` when every bag of `a` lies inside some bag of `b`.
pub fn refines(a: &TreeDecomposition, b: &TreeDecomposition) -> bool {
    a.bags.iter().all(|x| b.bags.iter().any(|y| x.is_subset(*y)))
}

/// The decompositions used for width computations and adaptive plans: those
/// not strictly coarser than another one. By monotonicity a coarser
/// decomposition never has a smaller cost, so dropping it changes no width.
/// The single-bag decomposition survives only when nothing refines it.
pub fn width_tds(tds: &[TreeDecomposition]) -> Vec<TreeDecomposition> {
    tds.iter()
        .enumerate()
        .filter(|(i, t)| {
            !tds.iter().enumerate().any(|(j, o)| {
                j != *i && refines(o, t) && (!refines(t, o) || j < *i)
            })
        })
        .map(|(_, t)| t.clone())
        .collect()
}

/// One bag per decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BagSelector {
    /// Index of the chosen bag within each decomposition.
    pub choice: Vec<usize>,
    pub bags: Vec<VarSet>,
}

impl BagSelector {
    /// Distinct chosen bags in canonical order.
    pub fn heads(&self) -> Vec<VarSet> {
        let set: BTreeSet<VarSet> = self.bags.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn render(&self, q: &ConjunctiveQuery) -> String {
        let names: Vec<String> = self.heads().iter().map(|b| q.render_set(*b)).collect();
        format!("({})", names.join(", "))
    }
}

/// The Cartesian product of the decompositions' bag sets, deduplicated by
/// head set. With `prune`, selectors whose head set strictly contains
/// another selector's head set are dropped; they can never attain the
/// maximum bound.
pub fn bag_selectors(tds: &[TreeDecomposition], prune: bool) -> Vec<BagSelector> {
    let mut out: Vec<BagSelector> = Vec::new();
    let mut seen: HashSet<Vec<VarSet>> = HashSet::new();
    let mut choice = vec![0usize; tds.len()];
    if tds.iter().any(|t| t.bags.is_empty()) || tds.is_empty() {
        return out;
    }
    loop {
        let sel = BagSelector {
            choice: choice.clone(),
            bags: choice.iter().enumerate().map(|(t, &b)| tds[t].bags[b]).collect(),
        };
        if seen.insert(sel.heads()) {
            out.push(sel);
        }
        // odometer, last decomposition fastest
        let mut i = tds.len();
        loop {
            if i == 0 {
                return finish(out, prune);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < tds[i].bags.len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

fn finish(sels: Vec<BagSelector>, prune: bool) -> Vec<BagSelector> {
    if !prune {
        return sels;
    }
    let heads: Vec<BTreeSet<VarSet>> = sels.iter().map(|s| s.heads().into_iter().collect()).collect();
    sels.into_iter()
        .enumerate()
        .filter(|(i, _)| {
            !heads
                .iter()
                .enumerate()
                .any(|(j, h)| j != *i && h.len() < heads[*i].len() && h.is_subset(&heads[*i]))
        })
        .map(|(_, s)| s)
        .collect()
}

/// `A_tb` heads for the chosen bags over the body of `q`; `t` and `b` are
/// one-based decomposition and bag positions of the first choice of a bag.
pub fn build_ddr(q: &ConjunctiveQuery, sel: &BagSelector) -> DisjunctiveRule {
    let mut heads: Vec<(VarSet, String)> = Vec::new();
    for (t, (&b, &bag)) in sel.choice.iter().zip(&sel.bags).enumerate() {
        if !heads.iter().any(|(h, _)| *h == bag) {
            heads.push((bag, format!("A{}{}", t + 1, b + 1)));
        }
    }
    DisjunctiveRule {
        heads,
        body: q.atoms.clone(),
        vars: q.vars().to_vec(),
    }
}

/// A single-head rule for one bag.
pub fn single_bag_ddr(q: &ConjunctiveQuery, bag: VarSet) -> DisjunctiveRule {
    DisjunctiveRule {
        heads: vec![(bag, format!("Q_{}", q.render_set(bag)))],
        body: q.atoms.clone(),
        vars: q.vars().to_vec(),
    }
}
