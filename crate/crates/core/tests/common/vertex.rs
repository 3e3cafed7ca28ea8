//! Exact LP optimum by basis enumeration, and random bounded LPs.
//!
//! With a slack per row, every vertex is a basic solution: choose `m` basic
//! columns among the `n + m`, put the rest at a bound and solve for the
//! basics. For each basis only the bound placement agreeing with the
//! reduced-cost signs is tried (both placements on ties), which keeps the
//! optimal vertex among the candidates while every candidate is still a
//! genuine feasible vertex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scuc::solver::LpProblem;

const INF: f64 = f64::INFINITY;

/// Dense LU solve of `a x = b` with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

/// Columns of `[A  -I]`, bounds and costs of the slack formulation.
struct Standard {
    m: usize,
    cols: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
}

impl Standard {
    fn new(p: &LpProblem) -> Self {
        let (n, m) = (p.n_cols(), p.rows.len());
        let mut cols = vec![vec![0.0; m]; n + m];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j][i] += a;
            }
            cols[n + i][i] = -1.0;
        }
        let lower = p.col_lower.iter().chain(&p.row_lower).copied().collect();
        let upper = p.col_upper.iter().chain(&p.row_upper).copied().collect();
        let cost = p.cost.iter().copied().chain(std::iter::repeat_n(0.0, m)).collect();
        Standard { m, cols, lower, upper, cost }
    }

    /// Best feasible vertex of `basis`, or `None`.
    fn vertex(&self, basis: &[usize], is_basic: &[bool]) -> Option<f64> {
        let m = self.m;
        let bmat: Vec<Vec<f64>> = (0..m).map(|i| basis.iter().map(|&j| self.cols[j][i]).collect()).collect();
        let cb: Vec<f64> = basis.iter().map(|&j| self.cost[j]).collect();
        let y = solve_dense(transpose(&bmat), cb)?;
        // nonbasic placements: fixed by the reduced-cost sign, free on ties
        let mut choices: Vec<(usize, Vec<f64>)> = Vec::new();
        for j in 0..self.cols.len() {
            if is_basic[j] {
                continue;
            }
            let d = self.cost[j] - (0..m).map(|i| y[i] * self.cols[j][i]).sum::<f64>();
            let opts: Vec<f64> = if d > 1e-11 {
                vec![self.lower[j]]
            } else if d < -1e-11 {
                vec![self.upper[j]]
            } else {
                vec![self.lower[j], self.upper[j]]
            };
            let opts: Vec<f64> = opts.into_iter().filter(|v| v.is_finite()).collect();
            if opts.is_empty() {
                return None;
            }
            choices.push((j, opts));
        }
        let mut best: Option<f64> = None;
        let mut pick = vec![0usize; choices.len()];
        loop {
            let mut rhs = vec![0.0; m];
            let mut obj = 0.0;
            for (k, (j, opts)) in choices.iter().enumerate() {
                let v = opts[pick[k]];
                obj += self.cost[*j] * v;
                for i in 0..m {
                    rhs[i] -= self.cols[*j][i] * v;
                }
            }
            if let Some(xb) = solve_dense(bmat.clone(), rhs) {
                let feasible = basis.iter().zip(&xb).all(|(&j, &v)| {
                    let tol = 1e-9 * (1.0 + v.abs());
                    v >= self.lower[j] - tol && v <= self.upper[j] + tol
                });
                if feasible {
                    obj += basis.iter().zip(&xb).map(|(&j, &v)| self.cost[j] * v).sum::<f64>();
                    if best.is_none_or(|b| obj < b) {
                        best = Some(obj);
                    }
                }
            }
            // next tie combination
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < choices[k].1.len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                return best;
            }
        }
    }
}

/// Minimum objective over the vertices of a bounded LP; `None` if empty.
pub fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let s = Standard::new(p);
    let total = s.cols.len();
    let m = s.m;
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..m).collect();
    let mut is_basic = vec![false; total];
    loop {
        is_basic.iter_mut().for_each(|b| *b = false);
        basis.iter().for_each(|&j| is_basic[j] = true);
        if let Some(v) = s.vertex(&basis, &is_basic) {
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
        // next m-subset in lexicographic order
        let mut i = m;
        while i > 0 && basis[i - 1] == total - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        basis[i - 1] += 1;
        for k in i..m {
            basis[k] = basis[k - 1] + 1;
        }
    }
}

/// Random LP with boxed columns and a known interior point, so it is
/// feasible and bounded. Up to 12 columns and 12 rows, `n + m <= 18`.
pub fn random_feasible_lp(seed: u64) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=12usize);
    let m = rng.random_range(1..=(18 - n).min(12));
    let mut p = LpProblem::new();
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.random_range(-5.0..0.0f64);
        let hi = lo + rng.random_range(0.5..6.0f64);
        point.push(rng.random_range(lo..hi));
        p.add_col(rng.random_range(-5.0..5.0), lo, hi);
    }
    for _ in 0..m {
        let mut entries = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                entries.push((j, rng.random_range(-4.0..4.0)));
            }
        }
        let at: f64 = entries.iter().map(|&(j, a)| a * point[j]).sum();
        let (lo, hi) = match rng.random_range(0..3) {
            0 => (at - rng.random_range(0.0..3.0), INF),
            1 => (-INF, at + rng.random_range(0.0..3.0)),
            _ => (at - rng.random_range(0.0..2.0), at + rng.random_range(0.0..2.0)),
        };
        p.add_row(entries, lo, hi);
    }
    p
}
