//! Dense two-phase simplex with Bland's rule and dual extraction.
//!
//! Problems are stated as maximizations. Every optimal solution carries one
//! dual multiplier per constraint, read off the final tableau, and can be
//! re-certified with [`LpSolution::certify`].

use std::fmt;

use crate::scalar::LpScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// `maximize objective·x` subject to the constraints and per-variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub var_bounds: Vec<VarBound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// `primal` and `dual` are empty unless `status` is optimal.
#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub value: T,
    pub primal: Vec<T>,
    pub dual: Vec<T>,
    pub pivots: usize,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            objective: vec![T::zero(); num_vars],
            constraints: Vec::new(),
            var_bounds: vec![VarBound::NonNegative; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: T) {
        self.objective[var] = coeff;
    }

    pub fn set_bound(&mut self, var: usize, bound: VarBound) {
        self.var_bounds[var] = bound;
    }

    /// Adds a constraint and returns its row index. Repeated variables in
    /// `coeffs` are summed.
    pub fn add_constraint(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, T)>,
        sense: Sense,
        rhs: T,
    ) -> usize {
        let mut merged: Vec<(usize, T)> = Vec::new();
        for (v, c) in coeffs {
            assert!(v < self.num_vars(), "variable {v} out of range");
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, acc)) => *acc = acc.clone() + c,
                None => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        merged.sort_by_key(|(v, _)| *v);
        self.constraints.push(Constraint {
            coeffs: merged,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn solve(&self) -> LpSolution<T> {
        solve(self)
    }
}

impl<T: LpScalar> LpSolution<T> {
    fn without_solution(status: LpStatus, pivots: usize) -> Self {
        LpSolution {
            status,
            value: T::zero(),
            primal: Vec::new(),
            dual: Vec::new(),
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Re-checks primal feasibility, dual feasibility, strong duality and
    /// complementary slackness. Exact scalars are checked without tolerance.
    pub fn certify(&self, lp: &LinearProgram<T>) -> Result<(), String> {
        if !self.is_optimal() {
            return Err(format!("status is {}", self.status));
        }
        let n = lp.num_vars();
        if self.primal.len() != n || self.dual.len() != lp.constraints.len() {
            return Err("solution dimensions do not match the program".into());
        }
        for (j, b) in lp.var_bounds.iter().enumerate() {
            if *b == VarBound::NonNegative && self.primal[j].is_neg() {
                return Err(format!("x[{j}] is negative"));
            }
        }
        let mut reduced = lp.objective.clone();
        let mut dual_obj = T::zero();
        for (i, c) in lp.constraints.iter().enumerate() {
            let lhs = c
                .coeffs
                .iter()
                .fold(T::zero(), |acc, (v, a)| acc + a.clone() * self.primal[*v].clone());
            let slack = c.rhs.clone() - lhs;
            let y = &self.dual[i];
            match c.sense {
                Sense::Le => {
                    if slack.is_neg() {
                        return Err(format!("row {i} violated"));
                    }
                    if y.is_neg() {
                        return Err(format!("dual of row {i} is negative"));
                    }
                    if !(slack.clone() * y.clone()).approx_zero() {
                        return Err(format!("complementary slackness fails on row {i}"));
                    }
                }
                Sense::Eq => {
                    if !slack.approx_zero() {
                        return Err(format!("equality row {i} violated"));
                    }
                }
            }
            for (v, a) in &c.coeffs {
                reduced[*v] = reduced[*v].clone() - a.clone() * y.clone();
            }
            dual_obj = dual_obj + c.rhs.clone() * y.clone();
        }
        // reduced[j] = c_j - (A^T y)_j must be <= 0, and = 0 for free columns
        for (j, r) in reduced.iter().enumerate() {
            match lp.var_bounds[j] {
                VarBound::Free => {
                    if !r.approx_zero() {
                        return Err(format!("dual equality fails on free column {j}"));
                    }
                }
                VarBound::NonNegative => {
                    if r.is_pos() {
                        return Err(format!("dual constraint fails on column {j}"));
                    }
                    if !(r.clone() * self.primal[j].clone()).approx_zero() {
                        return Err(format!("complementary slackness fails on column {j}"));
                    }
                }
            }
        }
        let primal_obj = lp
            .objective
            .iter()
            .zip(&self.primal)
            .fold(T::zero(), |acc, (c, x)| acc + c.clone() * x.clone());
        if !(primal_obj.clone() - self.value.clone()).approx_zero() {
            return Err("reported value differs from c·x".into());
        }
        if !(primal_obj - dual_obj).approx_zero() {
            return Err("primal and dual objectives differ".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<T: LpScalar> Tableau<T> {
    fn num_cols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [T], obj_val: &mut T) {
        self.pivots += 1;
        let p = self.rows[r][c].clone();
        let nz: Vec<usize> = (0..self.num_cols())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        for &j in &nz {
            self.rows[r][j] = self.rows[r][j].clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.rows[i];
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * pivot_row[j].clone();
            }
            row[c] = T::zero();
            self.rhs[i] = self.rhs[i].clone() - f * pivot_rhs.clone();
        }
        let f = obj[c].clone();
        if !f.is_zero() {
            for &j in &nz {
                obj[j] = obj[j].clone() - f.clone() * pivot_row[j].clone();
            }
            *obj_val = obj_val.clone() + f * pivot_rhs;
            obj[c] = T::zero();
        }
        self.basis[r] = c;
    }

    /// Runs Bland-rule simplex on reduced costs `obj` (maximization).
    fn run(&mut self, obj: &mut [T], obj_val: &mut T, allow: impl Fn(usize) -> bool) -> Outcome {
        loop {
            let entering = (0..self.num_cols()).find(|&j| allow(j) && obj[j].is_pos());
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs[i].clone() / a.clone();
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let diff = ratio.clone() - br.clone();
                        if diff.is_neg() || (diff.approx_zero() && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Outcome::Unbounded;
            };
            self.pivot(r, c, obj, obj_val);
        }
    }

    /// Reduced costs for objective `cost` (indexed by column) under the
    /// current basis.
    fn reduced_costs(&self, cost: &[T]) -> (Vec<T>, T) {
        let mut obj = cost.to_vec();
        let mut val = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    obj[j] = obj[j].clone() - cb.clone() * a.clone();
                }
            }
            val = val + cb * self.rhs[i].clone();
        }
        (obj, val)
    }
}

pub fn solve<T: LpScalar>(lp: &LinearProgram<T>) -> LpSolution<T> {
    let m = lp.constraints.len();
    let n = lp.num_vars();

    // structural columns: one per non-negative variable, two per free one
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut kinds = Vec::new();
    for b in &lp.var_bounds {
        let pos = kinds.len();
        kinds.push(ColKind::Structural);
        let neg = if *b == VarBound::Free {
            kinds.push(ColKind::Structural);
            Some(pos + 1)
        } else {
            None
        };
        col_of.push((pos, neg));
    }
    let mut slack_col = vec![None; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.sense == Sense::Le {
            slack_col[i] = Some(kinds.len());
            kinds.push(ColKind::Slack);
        }
    }
    let sign: Vec<bool> = lp.constraints.iter().map(|c| !c.rhs.is_neg()).collect();
    let mut unit_col = vec![0usize; m];
    for i in 0..m {
        let slack_is_unit = lp.constraints[i].sense == Sense::Le && sign[i];
        unit_col[i] = if slack_is_unit {
            slack_col[i].unwrap()
        } else {
            kinds.push(ColKind::Artificial);
            kinds.len() - 1
        };
    }
    let ncols = kinds.len();

    let mut rows = vec![vec![T::zero(); ncols]; m];
    let mut rhs = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let s = if sign[i] { T::one() } else { -T::one() };
        for (v, a) in &c.coeffs {
            let (p, q) = col_of[*v];
            rows[i][p] = a.clone() * s.clone();
            if let Some(q) = q {
                rows[i][q] = -(a.clone() * s.clone());
            }
        }
        if let Some(sc) = slack_col[i] {
            rows[i][sc] = s.clone();
        }
        rows[i][unit_col[i]] = T::one();
        rhs.push(c.rhs.clone() * s);
    }
    let mut tab = Tableau {
        rows,
        rhs,
        basis: unit_col.clone(),
        kinds,
        pivots: 0,
    };

    // phase 1: maximize -(sum of artificials)
    if tab.kinds.contains(&ColKind::Artificial) {
        let cost: Vec<T> = tab
            .kinds
            .iter()
            .map(|k| {
                if *k == ColKind::Artificial {
                    -T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let (mut obj, mut val) = tab.reduced_costs(&cost);
        let _ = tab.run(&mut obj, &mut val, |_| true);
        if val.is_neg() {
            return LpSolution::without_solution(LpStatus::Infeasible, tab.pivots);
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if tab.kinds[tab.basis[r]] != ColKind::Artificial {
                continue;
            }
            let c = (0..ncols)
                .find(|&j| tab.kinds[j] != ColKind::Artificial && !tab.rows[r][j].approx_zero());
            if let Some(c) = c {
                let mut dummy_obj = vec![T::zero(); ncols];
                let mut dummy_val = T::zero();
                tab.pivot(r, c, &mut dummy_obj, &mut dummy_val);
            }
        }
    }

    // phase 2
    let mut cost = vec![T::zero(); ncols];
    for (v, c) in lp.objective.iter().enumerate() {
        let (p, q) = col_of[v];
        cost[p] = c.clone();
        if let Some(q) = q {
            cost[q] = -c.clone();
        }
    }
    let (mut obj, mut val) = tab.reduced_costs(&cost);
    let kinds = tab.kinds.clone();
    let outcome = tab.run(&mut obj, &mut val, |j| kinds[j] != ColKind::Artificial);
    if let Outcome::Unbounded = outcome {
        return LpSolution::without_solution(LpStatus::Unbounded, tab.pivots);
    }

    let mut col_value = vec![T::zero(); ncols];
    for (i, &b) in tab.basis.iter().enumerate() {
        col_value[b] = tab.rhs[i].clone();
    }
    let primal: Vec<T> = col_of
        .iter()
        .map(|&(p, q)| match q {
            Some(q) => col_value[p].clone() - col_value[q].clone(),
            None => col_value[p].clone(),
        })
        .collect();
    let dual: Vec<T> = (0..m)
        .map(|i| {
            let y = -obj[unit_col[i]].clone();
            if sign[i] {
                y
            } else {
                -y
            }
        })
        .collect();
    LpSolution {
        status: LpStatus::Optimal,
        value: val,
        primal,
        dual,
        pivots: tab.pivots,
    }
}
