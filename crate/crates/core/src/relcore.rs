//! In-memory relations with set semantics and the operators every plan is
//! built from: natural join, projection, semijoin, degree statistics,
//! degree-based partitioning and Yannakakis evaluation over a join tree.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: &str) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::Schema("empty variable name".into()));
        }
        Ok(Variable(Arc::from(name)))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand used throughout the tests: `vars("X,Y")`.
pub fn vars(spec: &str) -> Vec<Variable> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Variable::new(s).expect("non-empty"))
        .collect()
}

/// A domain constant. Integers sort before strings; integers compare
/// numerically and strings lexicographically.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Str(Arc<str>),
}

impl Value {
    /// Parses a field: canonical decimal integers become `Int`, anything else
    /// (including `007`) stays a string so rendering round-trips.
    pub fn parse(field: &str) -> Value {
        match field.parse::<i64>() {
            Ok(i) if i.to_string() == field => Value::Int(i),
            _ => Value::Str(Arc::from(field)),
        }
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Int(_), Value::Str(_)) => Ordering::Less,
            (Value::Str(_), Value::Int(_)) => Ordering::Greater,
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::parse(v)
    }
}

pub type Tuple = Vec<Value>;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Schema {
    vars: Vec<Variable>,
}

impl Schema {
    pub fn new(vars: Vec<Variable>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &vars {
            if !seen.insert(v) {
                return Err(Error::Schema(format!("duplicate variable {v}")));
            }
        }
        Ok(Schema { vars })
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn position(&self, v: &Variable) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    pub fn contains(&self, v: &Variable) -> bool {
        self.position(v).is_some()
    }

    pub fn positions(&self, vs: &[Variable]) -> Result<Vec<usize>> {
        vs.iter()
            .map(|v| {
                self.position(v)
                    .ok_or_else(|| Error::Schema(format!("variable {v} not in schema {self:?}")))
            })
            .collect()
    }
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.vars.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A finite set of tuples over a schema. Tuples are kept sorted, so
/// iteration order is canonical.
#[derive(Clone, PartialEq, Eq)]
pub struct Relation {
    schema: Schema,
    tuples: BTreeSet<Tuple>,
}

impl Relation {
    pub fn empty(schema: Schema) -> Self {
        Relation {
            schema,
            tuples: BTreeSet::new(),
        }
    }

    pub fn from_tuples(schema: Schema, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut rel = Relation::empty(schema);
        for t in tuples {
            rel.insert(t)?;
        }
        Ok(rel)
    }

    /// Builds a relation from string fields, e.g. `rel("X,Y", &[&["1", "p"]])`.
    pub fn from_rows(vars_spec: &str, rows: &[&[&str]]) -> Result<Self> {
        let schema = Schema::new(vars(vars_spec))?;
        Relation::from_tuples(
            schema,
            rows.iter()
                .map(|r| r.iter().map(|f| Value::parse(f)).collect()),
        )
    }

    pub fn insert(&mut self, t: Tuple) -> Result<bool> {
        if t.len() != self.schema.arity() {
            return Err(Error::Schema(format!(
                "tuple of length {} for schema {:?}",
                t.len(),
                self.schema
            )));
        }
        Ok(self.tuples.insert(t))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn vars(&self) -> &[Variable] {
        self.schema.vars()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.tuples.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter()
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    /// Same tuples with the columns permuted to `order` (which must be a
    /// permutation of the schema).
    pub fn reorder(&self, order: &[Variable]) -> Result<Relation> {
        if order.len() != self.schema.arity() {
            return Err(Error::Schema(format!(
                "{order:?} is not a permutation of {:?}",
                self.schema
            )));
        }
        project(self, order)
    }

    /// Relation with the columns renamed positionally.
    pub fn rename(&self, to: &[Variable]) -> Result<Relation> {
        if to.len() != self.schema.arity() {
            return Err(Error::Schema(format!(
                "cannot rename {:?} to {to:?}",
                self.schema
            )));
        }
        Ok(Relation {
            schema: Schema::new(to.to_vec())?,
            tuples: self.tuples.clone(),
        })
    }

    /// Equality up to column order.
    pub fn same_as(&self, other: &Relation) -> bool {
        match other.reorder(self.vars()) {
            Ok(o) => o.tuples == self.tuples,
            Err(_) => false,
        }
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{{", self.schema)?;
        for (i, t) in self.tuples.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t:?}")?;
        }
        write!(f, "}}")
    }
}

/// Relation instances keyed by relation symbol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert(&mut self, symbol: &str, rel: Relation) {
        self.relations.insert(symbol.to_string(), rel);
    }

    pub fn get(&self, symbol: &str) -> Option<&Relation> {
        self.relations.get(symbol)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Total tuple count across all relations.
    pub fn size(&self) -> usize {
        self.relations.values().map(Relation::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.values().all(Relation::is_empty)
    }
}

fn key_of(t: &[Value], pos: &[usize]) -> Tuple {
    pos.iter().map(|&i| t[i].clone()).collect()
}

/// Natural join. Output columns are `left`'s followed by `right`'s new ones.
pub fn join(left: &Relation, right: &Relation) -> Relation {
    let shared: Vec<Variable> = left
        .vars()
        .iter()
        .filter(|v| right.schema.contains(v))
        .cloned()
        .collect();
    let extra: Vec<usize> = right
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| !left.schema.contains(v))
        .map(|(i, _)| i)
        .collect();
    let mut out_vars = left.vars().to_vec();
    out_vars.extend(extra.iter().map(|&i| right.vars()[i].clone()));
    let schema = Schema::new(out_vars).expect("disjoint by construction");
    let lpos = left.schema.positions(&shared).expect("shared");
    let rpos = right.schema.positions(&shared).expect("shared");

    let mut out = BTreeSet::new();
    let emit = |l: &Tuple, r: &Tuple, out: &mut BTreeSet<Tuple>| {
        let mut t = l.clone();
        t.extend(extra.iter().map(|&i| r[i].clone()));
        out.insert(t);
    };
    // build on the smaller input
    if left.len() <= right.len() {
        let mut index: HashMap<Tuple, Vec<&Tuple>> = HashMap::new();
        for l in left.iter() {
            index.entry(key_of(l, &lpos)).or_default().push(l);
        }
        for r in right.iter() {
            if let Some(ls) = index.get(&key_of(r, &rpos)) {
                for l in ls {
                    emit(l, r, &mut out);
                }
            }
        }
    } else {
        let mut index: HashMap<Tuple, Vec<&Tuple>> = HashMap::new();
        for r in right.iter() {
            index.entry(key_of(r, &rpos)).or_default().push(r);
        }
        for l in left.iter() {
            if let Some(rs) = index.get(&key_of(l, &lpos)) {
                for r in rs {
                    emit(l, r, &mut out);
                }
            }
        }
    }
    Relation {
        schema,
        tuples: out,
    }
}

/// Projection onto `onto`, in the given column order.
pub fn project(r: &Relation, onto: &[Variable]) -> Result<Relation> {
    let schema = Schema::new(onto.to_vec())?;
    let pos = r.schema.positions(onto)?;
    Ok(Relation {
        schema,
        tuples: r.iter().map(|t| key_of(t, &pos)).collect(),
    })
}

/// Tuples of `left` that join with at least one tuple of `right`.
pub fn semijoin(left: &Relation, right: &Relation) -> Relation {
    let shared: Vec<Variable> = left
        .vars()
        .iter()
        .filter(|v| right.schema.contains(v))
        .cloned()
        .collect();
    if right.is_empty() {
        return Relation::empty(left.schema.clone());
    }
    if shared.is_empty() {
        return left.clone();
    }
    let lpos = left.schema.positions(&shared).expect("shared");
    let rpos = right.schema.positions(&shared).expect("shared");
    let keys: HashSet<Tuple> = right.iter().map(|t| key_of(t, &rpos)).collect();
    Relation {
        schema: left.schema.clone(),
        tuples: left
            .iter()
            .filter(|t| keys.contains(&key_of(t, &lpos)))
            .cloned()
            .collect(),
    }
}

fn check_split(r: &Relation, ys: &[Variable], xs: &[Variable]) -> Result<(Vec<usize>, Vec<usize>)> {
    if let Some(v) = ys.iter().find(|v| xs.contains(v)) {
        return Err(Error::Argument(format!(
            "variable {v} on both sides of a degree"
        )));
    }
    Ok((r.schema.positions(ys)?, r.schema.positions(xs)?))
}

/// Number of distinct `ys` values per `xs` binding.
pub fn degree_map(r: &Relation, ys: &[Variable], xs: &[Variable]) -> Result<HashMap<Tuple, usize>> {
    let (ypos, xpos) = check_split(r, ys, xs)?;
    let mut groups: HashMap<Tuple, HashSet<Tuple>> = HashMap::new();
    for t in r.iter() {
        groups
            .entry(key_of(t, &xpos))
            .or_default()
            .insert(key_of(t, &ypos));
    }
    Ok(groups.into_iter().map(|(k, v)| (k, v.len())).collect())
}

/// `deg_r(ys | xs)`: the largest number of distinct `ys` values sharing one
/// `xs` binding; with `xs` empty this is `|π_ys r|`.
pub fn degree(r: &Relation, ys: &[Variable], xs: &[Variable]) -> Result<usize> {
    Ok(degree_map(r, ys, xs)?.into_values().max().unwrap_or(0))
}

/// `Σ_x deg(ys | xs = x)^k`, the k-th power of the ℓk-norm of the degree
/// sequence.
pub fn lknorm_pow(r: &Relation, ys: &[Variable], xs: &[Variable], k: u32) -> Result<BigUint> {
    if k == 0 {
        return Err(Error::Argument("norm order must be at least 1".into()));
    }
    Ok(degree_map(r, ys, xs)?
        .into_values()
        .map(|d| BigUint::from(d).pow(k))
        .sum())
}

/// Splits `r` into tuples whose `xs` binding has degree at most `threshold`
/// (light) and the rest (heavy).
pub fn partition_by_degree(
    r: &Relation,
    ys: &[Variable],
    xs: &[Variable],
    threshold: &BigRational,
) -> Result<(Relation, Relation)> {
    let degrees = degree_map(r, ys, xs)?;
    let xpos = r.schema.positions(xs)?;
    let mut light = Relation::empty(r.schema.clone());
    let mut heavy = Relation::empty(r.schema.clone());
    for t in r.iter() {
        let d = degrees[&key_of(t, &xpos)];
        let d = BigRational::from_integer(d.into());
        if d <= *threshold {
            light.tuples.insert(t.clone());
        } else {
            heavy.tuples.insert(t.clone());
        }
    }
    Ok((light, heavy))
}

/// Bags with one relation each, connected by undirected tree edges.
#[derive(Clone, Debug)]
pub struct JoinTree {
    pub bags: Vec<Relation>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct YannakakisStats {
    /// Tuples surviving the two semijoin passes, summed over bags.
    pub reduced_tuples: usize,
    /// Largest relation materialized during the join phase.
    pub peak_intermediate: usize,
    pub root: usize,
}

impl JoinTree {
    fn adjacency(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.bags.len();
        if n == 0 {
            return Err(Error::Plan("join tree without bags".into()));
        }
        if self.edges.len() != n - 1 {
            return Err(Error::Plan(format!(
                "{} edges for {} bags is not a tree",
                self.edges.len(),
                n
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Plan(format!("bad edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Plan("join tree is disconnected".into()));
        }
        Ok(adj)
    }

    /// Checks that every variable's bags form a connected subtree.
    pub fn check_running_intersection(&self) -> Result<()> {
        let adj = self.adjacency()?;
        let all: BTreeSet<&Variable> = self.bags.iter().flat_map(|b| b.vars()).collect();
        for v in all {
            let holders: Vec<usize> = (0..self.bags.len())
                .filter(|&i| self.bags[i].schema.contains(v))
                .collect();
            let mut seen = HashSet::from([holders[0]]);
            let mut stack = vec![holders[0]];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if self.bags[w].schema.contains(v) && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            if seen.len() != holders.len() {
                return Err(Error::Plan(format!(
                    "running intersection violated for {v}"
                )));
            }
        }
        Ok(())
    }
}

fn sorted_names(r: &Relation) -> Vec<&str> {
    let mut names: Vec<&str> = r.vars().iter().map(Variable::name).collect();
    names.sort_unstable();
    names
}

/// Evaluates `π_free(⋈ bags)` with a full semijoin reduction followed by a
/// bottom-up join that keeps only bag variables and free variables.
pub fn yannakakis(tree: &JoinTree, free: &[Variable]) -> Result<Relation> {
    yannakakis_instrumented(tree, free).map(|(r, _)| r)
}

pub fn yannakakis_instrumented(
    tree: &JoinTree,
    free: &[Variable],
) -> Result<(Relation, YannakakisStats)> {
    tree.check_running_intersection()?;
    let adj = tree.adjacency()?;
    let n = tree.bags.len();
    for v in free {
        if !tree.bags.iter().any(|b| b.schema.contains(v)) {
            return Err(Error::Schema(format!("free variable {v} not in any bag")));
        }
    }
    Schema::new(free.to_vec())?;

    let root = (0..n)
        .min_by(|&a, &b| {
            let fa = free.iter().filter(|v| tree.bags[a].schema.contains(v)).count();
            let fb = free.iter().filter(|v| tree.bags[b].schema.contains(v)).count();
            fb.cmp(&fa)
                .then_with(|| sorted_names(&tree.bags[a]).cmp(&sorted_names(&tree.bags[b])))
                .then(a.cmp(&b))
        })
        .expect("non-empty");

    // preorder from the root
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(u) = stack.pop() {
        order.push(u);
        for &w in adj[u].iter().rev() {
            if parent[w] == usize::MAX {
                parent[w] = u;
                stack.push(w);
            }
        }
    }

    let mut rels: Vec<Relation> = tree.bags.clone();
    for &u in order.iter().rev() {
        if u != root {
            let p = parent[u];
            rels[p] = semijoin(&rels[p], &rels[u]);
        }
    }
    for &u in &order {
        if u != root {
            let p = parent[u];
            rels[u] = semijoin(&rels[u], &rels[p]);
        }
    }
    let mut stats = YannakakisStats {
        reduced_tuples: rels.iter().map(Relation::len).sum(),
        peak_intermediate: 0,
        root,
    };

    let mut subtree_vars: Vec<BTreeSet<Variable>> =
        rels.iter().map(|r| r.vars().iter().cloned().collect()).collect();
    let mut result: Vec<Option<Relation>> = vec![None; n];
    for &u in order.iter().rev() {
        let mut acc = rels[u].clone();
        for &w in &adj[u] {
            if parent[w] == u && w != u {
                let child = result[w].take().expect("children first");
                acc = join(&acc, &child);
                stats.peak_intermediate = stats.peak_intermediate.max(acc.len());
                let sv = subtree_vars[w].clone();
                subtree_vars[u].extend(sv);
            }
        }
        let keep: Vec<Variable> = acc
            .vars()
            .iter()
            .filter(|v| rels[u].schema.contains(v) || free.contains(v))
            .cloned()
            .collect();
        if keep.len() != acc.schema.arity() {
            acc = project(&acc, &keep)?;
        }
        stats.peak_intermediate = stats.peak_intermediate.max(acc.len());
        result[u] = Some(acc);
    }
    let out = project(result[root].as_ref().expect("root"), free)?;
    Ok((out, stats))
}

/// Degrees as rationals, convenient for threshold comparisons.
pub fn degree_ratio(d: usize) -> BigRational {
    if d == 0 {
        BigRational::zero()
    } else {
        BigRational::from_integer(d.into())
    }
}
