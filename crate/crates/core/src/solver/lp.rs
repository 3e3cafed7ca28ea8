//! Bounded dual simplex for `min c'x  s.t.  lo <= Ax <= hi,  l <= x <= u`.
//!
//! Every row gets a logical variable `r = Ax`, so the working form is
//! `[A -I] (x, r) = 0` with bounds on all `n + m` variables. The all-logical
//! basis is dual feasible once each structural sits at the bound its cost
//! prefers; infinite bounds are replaced by a large artificial box, and a
//! solution that ends on such a box is reported as unbounded.

use std::sync::Arc;

use thiserror::Error;

use super::lu::LuFactors;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const ARTIFICIAL_BOUND: f64 = 1e9;
const REFACTOR_INTERVAL: usize = 100;
const BLAND_AFTER: usize = 60;
const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("column {0} has lower bound above upper bound")]
    InvalidBounds(usize),
    #[error("row {0} has lower bound above upper bound")]
    InvalidRow(usize),
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("numerical trouble after {0} iterations")]
    Numerical(usize),
}

/// LP in row-wise form.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub objective_offset: f64,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, entries: Vec<(usize, f64)>, lower: f64, upper: f64) -> usize {
        self.rows.push(entries);
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        self.rows.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_cols() {
            worst = worst.max(self.col_lower[j] - x[j]).max(x[j] - self.col_upper[j]);
        }
        for (i, act) in self.row_activity(x).into_iter().enumerate() {
            worst = worst.max(self.row_lower[i] - act).max(act - self.row_upper[i]);
        }
        worst
    }

    fn validate(&self) -> Result<(), LpError> {
        for j in 0..self.n_cols() {
            if self.col_lower[j] > self.col_upper[j] || self.col_lower[j].is_nan() {
                return Err(LpError::InvalidBounds(j));
            }
        }
        for i in 0..self.n_rows() {
            if self.row_lower[i] > self.row_upper[i] || self.row_lower[i].is_nan() {
                return Err(LpError::InvalidRow(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    /// Row duals: sensitivity of the objective to the active row bound.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Row whose dual ray proved infeasibility.
    pub infeasible_row: Option<usize>,
    pub iterations: usize,
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let scaled = Arc::new(ScaledLp::new(problem)?);
    let mut engine = DualSimplex::new(scaled);
    let status = engine.solve()?;
    Ok(engine.solution(status))
}

/// Scaled, column- and row-compressed copy of an [`LpProblem`].
#[derive(Debug)]
pub struct ScaledLp {
    n: usize,
    m: usize,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    a_start: Vec<usize>,
    a_idx: Vec<usize>,
    a_val: Vec<f64>,
    r_start: Vec<usize>,
    r_idx: Vec<usize>,
    r_val: Vec<f64>,
    logical_idx: Vec<usize>,
    neg_one: Vec<f64>,
    offset: f64,
}

impl ScaledLp {
    pub fn new(p: &LpProblem) -> Result<Self, LpError> {
        p.validate()?;
        let (n, m) = (p.n_cols(), p.n_rows());
        let (row_scale, col_scale) = geometric_scaling(p);

        let mut counts = vec![0usize; n];
        for row in &p.rows {
            for &(j, a) in row {
                if a != 0.0 {
                    counts[j] += 1;
                }
            }
        }
        let mut a_start = vec![0usize; n + 1];
        for j in 0..n {
            a_start[j + 1] = a_start[j] + counts[j];
        }
        let nnz = a_start[n];
        let mut a_idx = vec![0usize; nnz];
        let mut a_val = vec![0.0; nnz];
        let mut fill = a_start.clone();
        let mut r_start = vec![0usize; m + 1];
        let mut r_idx = Vec::with_capacity(nnz);
        let mut r_val = Vec::with_capacity(nnz);
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in row {
                if a == 0.0 {
                    continue;
                }
                let v = a * row_scale[i] * col_scale[j];
                a_idx[fill[j]] = i;
                a_val[fill[j]] = v;
                fill[j] += 1;
                r_idx.push(j);
                r_val.push(v);
            }
            r_start[i + 1] = r_idx.len();
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for j in 0..n {
            lower.push(p.col_lower[j] / col_scale[j]);
            upper.push(p.col_upper[j] / col_scale[j]);
        }
        for i in 0..m {
            lower.push(p.row_lower[i] * row_scale[i]);
            upper.push(p.row_upper[i] * row_scale[i]);
        }
        Ok(ScaledLp {
            n,
            m,
            cost: p.cost.iter().zip(&col_scale).map(|(c, s)| c * s).collect(),
            col_scale,
            row_scale,
            lower,
            upper,
            a_start,
            a_idx,
            a_val,
            r_start,
            r_idx,
            r_val,
            logical_idx: (0..m).collect(),
            neg_one: vec![-1.0; m],
            offset: p.objective_offset,
        })
    }

    pub fn n_cols(&self) -> usize {
        self.n
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        if j < self.n {
            let (s, e) = (self.a_start[j], self.a_start[j + 1]);
            (&self.a_idx[s..e], &self.a_val[s..e])
        } else {
            let i = j - self.n;
            (&self.logical_idx[i..i + 1], &self.neg_one[i..i + 1])
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.cost[j]
        } else {
            0.0
        }
    }
}

/// Power-of-two geometric mean scaling, alternating rows and columns.
fn geometric_scaling(p: &LpProblem) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (p.n_cols(), p.n_rows());
    let mut rs = vec![1.0; m];
    let mut cs = vec![1.0; n];
    for _ in 0..6 {
        for (i, row) in p.rows.iter().enumerate() {
            let (lo, hi) = min_max(row.iter().map(|&(j, a)| a.abs() * cs[j]));
            if hi > 0.0 {
                rs[i] = 1.0 / (lo * hi).sqrt();
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in row {
                let v = a.abs() * rs[i];
                if v > 0.0 {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                cs[j] = 1.0 / (lo[j] * hi[j]).sqrt();
            }
        }
    }
    let pow2 = |v: f64| 2f64.powi(v.log2().round() as i32);
    (
        rs.into_iter().map(pow2).collect(),
        cs.into_iter().map(pow2).collect(),
    )
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.filter(|v| *v > 0.0)
        .fold((f64::INFINITY, 0.0), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Compact basis snapshot used to warm start a later solve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis(pub Vec<VarState>);

enum Pass {
    Optimal,
    Infeasible(usize),
}

pub struct DualSimplex {
    p: Arc<ScaledLp>,
    /// Bounds of the current problem (node bounds in branch and bound).
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    /// Working bounds, possibly with artificial boxes.
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    weights: Vec<f64>,
    lu: LuFactors,
    rho: Vec<f64>,
    alpha_row: Vec<f64>,
    alpha_col: Vec<f64>,
    tau: Vec<f64>,
    work: Vec<f64>,
    iterations: usize,
    iteration_limit: usize,
    infeasible_row: Option<usize>,
}

impl DualSimplex {
    pub fn new(p: Arc<ScaledLp>) -> Self {
        let (n, m) = (p.n, p.m);
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            state.push(if p.cost[j] >= 0.0 {
                VarState::AtLower
            } else {
                VarState::AtUpper
            });
        }
        state.extend(std::iter::repeat_n(VarState::Basic, m));
        DualSimplex {
            base_lower: p.lower.clone(),
            base_upper: p.upper.clone(),
            lower: p.lower.clone(),
            upper: p.upper.clone(),
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            state,
            basis: (n..n + m).collect(),
            pos: (0..n + m).map(|j| if j >= n { j - n } else { NONE }).collect(),
            weights: vec![1.0; m],
            lu: LuFactors::default(),
            rho: vec![0.0; m],
            alpha_row: vec![0.0; n + m],
            alpha_col: vec![0.0; m],
            tau: vec![0.0; m],
            work: vec![0.0; m],
            iterations: 0,
            iteration_limit: 50 * (n + m) + 10_000,
            infeasible_row: None,
            p,
        }
    }

    pub fn problem(&self) -> &Arc<ScaledLp> {
        &self.p
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Sets the bounds of structural column `j` in unscaled units.
    pub fn set_col_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let s = self.p.col_scale[j];
        self.base_lower[j] = lower / s;
        self.base_upper[j] = upper / s;
    }

    /// Restores the original column bounds.
    pub fn reset_bounds(&mut self) {
        self.base_lower.copy_from_slice(&self.p.lower);
        self.base_upper.copy_from_slice(&self.p.upper);
    }

    pub fn basis(&self) -> Basis {
        Basis(self.state.clone())
    }

    pub fn load_basis(&mut self, b: &Basis) {
        let (n, m) = (self.p.n, self.p.m);
        if b.0.len() != n + m || b.0.iter().filter(|s| **s == VarState::Basic).count() != m {
            return;
        }
        self.state.copy_from_slice(&b.0);
        self.basis.clear();
        for j in 0..n + m {
            if self.state[j] == VarState::Basic {
                self.pos[j] = self.basis.len();
                self.basis.push(j);
            } else {
                self.pos[j] = NONE;
            }
        }
        self.weights.iter_mut().for_each(|w| *w = 1.0);
    }

    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        self.infeasible_row = None;
        self.iterations = 0;
        for j in 0..self.base_lower.len() {
            if self.base_lower[j] > self.base_upper[j] + PRIMAL_TOL * (1.0 + self.base_lower[j].abs())
            {
                return Ok(LpStatus::Infeasible);
            }
        }
        self.lower.copy_from_slice(&self.base_lower);
        self.upper.copy_from_slice(&self.base_upper);
        self.place_nonbasics();
        self.refactor()?;
        self.compute_duals();
        self.make_dual_feasible();
        self.compute_primal();

        let mut cleanups = 0;
        let mut troubles = 0;
        loop {
            match self.dual_pass(&mut troubles)? {
                Pass::Infeasible(r) => {
                    self.infeasible_row = Some(r);
                    return Ok(LpStatus::Infeasible);
                }
                Pass::Optimal => {
                    self.refactor()?;
                    self.compute_primal();
                    self.compute_duals();
                    let flipped = self.make_dual_feasible();
                    if flipped > 0 {
                        self.compute_primal();
                    }
                    if (flipped == 0 && self.leaving_row(false).is_none()) || cleanups >= 5 {
                        break;
                    }
                    cleanups += 1;
                }
            }
        }
        if self.on_artificial_bound() {
            return Ok(LpStatus::Unbounded);
        }
        Ok(LpStatus::Optimal)
    }

    /// Unscaled primal values of the structural columns.
    pub fn values(&self) -> Vec<f64> {
        (0..self.p.n).map(|j| self.x[j] * self.p.col_scale[j]).collect()
    }

    pub fn objective(&self) -> f64 {
        self.p.offset
            + (0..self.p.n)
                .map(|j| self.p.cost[j] * self.x[j])
                .sum::<f64>()
    }

    pub fn solution(&self, status: LpStatus) -> LpSolution {
        let (n, m) = (self.p.n, self.p.m);
        LpSolution {
            status,
            objective: if status == LpStatus::Optimal {
                self.objective()
            } else {
                f64::NAN
            },
            x: self.values(),
            row_activity: (0..m).map(|i| self.x[n + i] / self.p.row_scale[i]).collect(),
            duals: (0..m).map(|i| self.d[n + i] * self.p.row_scale[i]).collect(),
            reduced_costs: (0..n).map(|j| self.d[j] / self.p.col_scale[j]).collect(),
            infeasible_row: self.infeasible_row,
            iterations: self.iterations,
        }
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.x.len() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            match self.state[j] {
                VarState::Basic => {}
                VarState::AtLower if lo.is_finite() => self.x[j] = lo,
                VarState::AtUpper if hi.is_finite() => self.x[j] = hi,
                _ => {
                    if lo.is_finite() {
                        self.state[j] = VarState::AtLower;
                        self.x[j] = lo;
                    } else if hi.is_finite() {
                        self.state[j] = VarState::AtUpper;
                        self.x[j] = hi;
                    } else {
                        self.lower[j] = -ARTIFICIAL_BOUND;
                        self.state[j] = VarState::AtLower;
                        self.x[j] = -ARTIFICIAL_BOUND;
                    }
                }
            }
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.p.m;
        for _ in 0..4 {
            let p = &self.p;
            let basis = &self.basis;
            match LuFactors::factorize(m, |k| p.column(basis[k])) {
                Ok(lu) => {
                    self.lu = lu;
                    return Ok(());
                }
                Err(sing) => {
                    // swap the dependent columns for logicals of uncovered rows
                    for (&k, &row) in sing.positions.iter().zip(&sing.rows) {
                        let logical = p.n + row;
                        if self.state[logical] == VarState::Basic {
                            continue;
                        }
                        let out = self.basis[k];
                        self.pos[out] = NONE;
                        self.state[out] = if self.lower[out].is_finite() {
                            VarState::AtLower
                        } else {
                            VarState::AtUpper
                        };
                        self.basis[k] = logical;
                        self.pos[logical] = k;
                        self.state[logical] = VarState::Basic;
                        self.weights[k] = 1.0;
                    }
                    self.place_nonbasics();
                }
            }
        }
        Err(LpError::Numerical(self.iterations))
    }

    fn compute_primal(&mut self) {
        let p = Arc::clone(&self.p);
        let rhs = &mut self.rho;
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..p.n + p.m {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let (idx, val) = p.column(j);
                for (&i, &a) in idx.iter().zip(val) {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        self.lu.ftran(rhs, &mut self.work);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn compute_duals(&mut self) {
        let p = Arc::clone(&self.p);
        let y = &mut self.rho;
        for (k, &j) in self.basis.iter().enumerate() {
            y[k] = p.cost(j);
        }
        self.lu.btran(y, &mut self.work);
        for j in 0..p.n {
            self.d[j] = if self.state[j] == VarState::Basic {
                0.0
            } else {
                let (idx, val) = p.column(j);
                p.cost[j] - idx.iter().zip(val).map(|(&i, &a)| a * y[i]).sum::<f64>()
            };
        }
        for i in 0..p.m {
            let j = p.n + i;
            self.d[j] = if self.state[j] == VarState::Basic { 0.0 } else { y[i] };
        }
    }

    /// Moves dual infeasible nonbasics to their other bound, boxing them
    /// artificially when that bound is infinite. Returns the number moved.
    fn make_dual_feasible(&mut self) -> usize {
        let mut moved = 0;
        for j in 0..self.x.len() {
            if self.lower[j] == self.upper[j] {
                continue;
            }
            match self.state[j] {
                VarState::AtLower if self.d[j] < -DUAL_TOL => {
                    if !self.upper[j].is_finite() {
                        self.upper[j] = self.lower[j].max(0.0) + ARTIFICIAL_BOUND;
                    }
                    self.state[j] = VarState::AtUpper;
                    self.x[j] = self.upper[j];
                    moved += 1;
                }
                VarState::AtUpper if self.d[j] > DUAL_TOL => {
                    if !self.lower[j].is_finite() {
                        self.lower[j] = self.upper[j].min(0.0) - ARTIFICIAL_BOUND;
                    }
                    self.state[j] = VarState::AtLower;
                    self.x[j] = self.lower[j];
                    moved += 1;
                }
                _ => {}
            }
        }
        moved
    }

    fn on_artificial_bound(&self) -> bool {
        (0..self.x.len()).any(|j| {
            let art_lo = self.lower[j] != self.base_lower[j];
            let art_hi = self.upper[j] != self.base_upper[j];
            (art_lo && self.x[j] <= self.lower[j] * 0.5)
                || (art_hi && self.x[j] >= self.upper[j] * 0.5)
        })
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        let (lo, hi) = (self.lower[j], self.upper[j]);
        if x < lo - PRIMAL_TOL * (1.0 + lo.abs()) {
            lo - x
        } else if x > hi + PRIMAL_TOL * (1.0 + hi.abs()) {
            x - hi
        } else {
            0.0
        }
    }

    /// Basis position to leave: steepest edge, or smallest variable index
    /// in Bland mode.
    fn leaving_row(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_score = 0.0;
        let mut best_var = NONE;
        for (k, &j) in self.basis.iter().enumerate() {
            let inf = self.infeasibility(j);
            if inf <= 0.0 {
                continue;
            }
            if bland {
                if j < best_var {
                    best_var = j;
                    best = Some(k);
                }
            } else {
                let score = inf * inf / self.weights[k];
                if score > best_score {
                    best_score = score;
                    best = Some(k);
                }
            }
        }
        best
    }

    fn dual_pass(&mut self, troubles: &mut usize) -> Result<Pass, LpError> {
        let p = Arc::clone(&self.p);
        let (n, m) = (p.n, p.m);
        let mut degenerate = 0usize;
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        loop {
            if self.iterations >= self.iteration_limit {
                return Err(LpError::IterationLimit(self.iterations));
            }
            if self.lu.num_updates() >= REFACTOR_INTERVAL {
                self.refactor()?;
                self.compute_primal();
                self.compute_duals();
                if self.make_dual_feasible() > 0 {
                    self.compute_primal();
                }
            }
            let bland = degenerate > BLAND_AFTER;
            let Some(r) = self.leaving_row(bland) else {
                return Ok(Pass::Optimal);
            };
            let leaving = self.basis[r];
            let to_lower = self.x[leaving] < self.lower[leaving];
            let delta = if to_lower {
                self.x[leaving] - self.lower[leaving]
            } else {
                self.x[leaving] - self.upper[leaving]
            };

            // row r of B^-1
            self.rho.iter_mut().for_each(|v| *v = 0.0);
            self.rho[r] = 1.0;
            self.lu.btran(&mut self.rho, &mut self.work);
            let rho_norm2: f64 = self.rho.iter().map(|v| v * v).sum();

            // pivot row over nonbasics
            self.alpha_row.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let ri = self.rho[i];
                if ri == 0.0 {
                    continue;
                }
                for k in p.r_start[i]..p.r_start[i + 1] {
                    self.alpha_row[p.r_idx[k]] += ri * p.r_val[k];
                }
                self.alpha_row[n + i] = -ri;
            }

            // ratio test candidates
            candidates.clear();
            for j in 0..n + m {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.alpha_row[j];
                let at = if to_lower { -a } else { a };
                let ratio = match st {
                    VarState::AtLower if at > PIVOT_TOL => self.d[j].max(0.0) / at,
                    VarState::AtUpper if at < -PIVOT_TOL => (-self.d[j]).max(0.0) / -at,
                    _ => continue,
                };
                candidates.push((ratio, j));
            }
            if candidates.is_empty() {
                return Ok(Pass::Infeasible(p.basis_row_hint(leaving)));
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            // bound flipping: pass breakpoints while the dual slope stays positive
            let mut slope = delta.abs();
            let mut enter_at = None;
            if bland {
                enter_at = Some(0);
            } else {
                for (k, &(_, j)) in candidates.iter().enumerate() {
                    let range = self.upper[j] - self.lower[j];
                    slope -= self.alpha_row[j].abs() * range;
                    if slope < 0.0 || !range.is_finite() {
                        enter_at = Some(k);
                        break;
                    }
                }
            }
            let k0 = match enter_at {
                Some(k) => k,
                // the dual ray stays improving past every breakpoint
                None if slope > PRIMAL_TOL * (1.0 + delta.abs()) => {
                    return Ok(Pass::Infeasible(p.basis_row_hint(leaving)));
                }
                None => candidates.len() - 1,
            };
            // among near ties prefer the largest pivot
            let t0 = candidates[k0].0;
            let mut q = candidates[k0].1;
            if !bland {
                let mut best = self.alpha_row[q].abs();
                for &(t, j) in &candidates[k0 + 1..] {
                    if t > t0 + DUAL_TOL {
                        break;
                    }
                    if self.alpha_row[j].abs() > best {
                        best = self.alpha_row[j].abs();
                        q = j;
                    }
                }
            }
            let flips: Vec<usize> = candidates[..k0].iter().map(|c| c.1).collect();

            // entering column
            self.alpha_col.iter_mut().for_each(|v| *v = 0.0);
            let (idx, val) = p.column(q);
            for (&i, &a) in idx.iter().zip(val) {
                self.alpha_col[i] = a;
            }
            self.lu.ftran(&mut self.alpha_col, &mut self.work);
            let a_rq = self.alpha_col[r];
            let a_row = self.alpha_row[q];
            if (a_rq - a_row).abs() > 1e-7 * (1.0 + a_rq.abs()) || a_rq.abs() < PIVOT_TOL {
                *troubles += 1;
                if *troubles > 20 {
                    return Err(LpError::Numerical(self.iterations));
                }
                self.refactor()?;
                self.compute_primal();
                self.compute_duals();
                if self.make_dual_feasible() > 0 {
                    self.compute_primal();
                }
                continue;
            }

            if !flips.is_empty() {
                self.apply_flips(&flips);
            }

            // dual update
            let theta_d = self.d[q] / a_row;
            if theta_d != 0.0 {
                for j in 0..n + m {
                    if self.state[j] != VarState::Basic {
                        self.d[j] -= theta_d * self.alpha_row[j];
                    }
                }
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta_d;
            if theta_d.abs() < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            // primal update
            let target = if to_lower { self.lower[leaving] } else { self.upper[leaving] };
            let theta_p = (self.x[leaving] - target) / a_rq;
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] -= theta_p * self.alpha_col[k];
            }
            self.x[q] += theta_p;
            self.x[leaving] = target;

            // steepest edge weights
            self.tau.copy_from_slice(&self.rho);
            self.lu.ftran(&mut self.tau, &mut self.work);
            for k in 0..m {
                if k == r {
                    continue;
                }
                let ratio = self.alpha_col[k] / a_rq;
                if ratio != 0.0 {
                    let w = self.weights[k] + ratio * (ratio * rho_norm2 - 2.0 * self.tau[k]);
                    self.weights[k] = w.max(1e-10);
                }
            }
            self.weights[r] = (rho_norm2 / (a_rq * a_rq)).max(1e-10);

            self.lu.update(r, &self.alpha_col);
            self.basis[r] = q;
            self.pos[q] = r;
            self.pos[leaving] = NONE;
            self.state[q] = VarState::Basic;
            self.state[leaving] = if to_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.iterations += 1;
        }
    }

    fn apply_flips(&mut self, flips: &[usize]) {
        let p = Arc::clone(&self.p);
        let rhs = &mut self.tau;
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for &j in flips {
            let (new_state, new_x) = match self.state[j] {
                VarState::AtLower => (VarState::AtUpper, self.upper[j]),
                _ => (VarState::AtLower, self.lower[j]),
            };
            let dx = new_x - self.x[j];
            self.x[j] = new_x;
            self.state[j] = new_state;
            let (idx, val) = p.column(j);
            for (&i, &a) in idx.iter().zip(val) {
                rhs[i] += a * dx;
            }
        }
        self.lu.ftran(rhs, &mut self.work);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] -= rhs[k];
        }
    }
}

impl ScaledLp {
    /// Row index associated with a leaving variable, for certificates.
    fn basis_row_hint(&self, var: usize) -> usize {
        if var >= self.n {
            var - self.n
        } else {
            self.a_start
                .get(var)
                .and_then(|&s| self.a_idx.get(s).copied())
                .unwrap_or(0)
        }
    }
}
