//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Right-looking Gaussian elimination with Markowitz pivot selection and
//! threshold partial pivoting. Column and row singletons are taken first,
//! which covers the (large) triangular part of a typical basis without any
//! fill. After a basis change the factorization is extended with an eta
//! column instead of being rebuilt.

/// Entries smaller than this are never used as pivots.
const ABS_PIVOT_TOL: f64 = 1e-11;
/// Threshold partial pivoting factor.
const REL_PIVOT_TOL: f64 = 0.01;
const DROP_TOL: f64 = 1e-14;

/// Basis is structurally or numerically singular.
#[derive(Debug, Clone)]
pub struct Singular {
    /// Basis positions that received no pivot.
    pub positions: Vec<usize>,
    /// Rows that received no pivot.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// U by columns and L by rows, both keyed by pivot and holding rows,
    /// so that either solve can skip zero entries.
    ut_start: Vec<usize>,
    ut_idx: Vec<usize>,
    ut_val: Vec<f64>,
    lt_start: Vec<usize>,
    lt_idx: Vec<usize>,
    lt_val: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column `j` is `column(j)` given as
    /// parallel (row index, value) slices.
    pub fn factorize<'a, F>(m: usize, column: F) -> Result<LuFactors, Singular>
    where
        F: Fn(usize) -> (&'a [usize], &'a [f64]),
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for j in 0..m {
            let (idx, val) = column(j);
            for (&i, &v) in idx.iter().zip(val) {
                if v != 0.0 {
                    rows[i].push((j, v));
                    cols[j].push(i);
                }
            }
        }
        let mut f = LuFactors {
            m,
            u_start: vec![0],
            l_start: vec![0],
            eta_start: vec![0],
            ..Default::default()
        };
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_singles: Vec<usize> = (0..m).filter(|&j| cols[j].len() == 1).collect();
        let mut row_singles: Vec<usize> = (0..m).filter(|&i| rows[i].len() == 1).collect();
        // scatter map: column -> slot in the row being updated
        let mut slot = vec![usize::MAX; m];

        for _ in 0..m {
            let pivot = Self::pick_col_singleton(&mut col_singles, &col_active, &cols, &rows)
                .or_else(|| {
                    Self::pick_row_singleton(&mut row_singles, &row_active, &rows, &cols)
                })
                .or_else(|| Self::pick_markowitz(&col_active, &cols, &rows));
            let Some((r, c)) = pivot else {
                break;
            };

            // pivot row becomes a row of U
            let pivot_row = std::mem::take(&mut rows[r]);
            let mut diag = 0.0;
            for &(j, v) in &pivot_row {
                if j == c {
                    diag = v;
                } else {
                    f.u_idx.push(j);
                    f.u_val.push(v);
                    remove_item(&mut cols[j], r);
                    if col_active[j] && cols[j].len() == 1 {
                        col_singles.push(j);
                    }
                }
            }
            f.u_diag.push(diag);
            f.u_start.push(f.u_idx.len());
            f.piv_row.push(r);
            f.piv_col.push(c);
            row_active[r] = false;
            col_active[c] = false;

            // eliminate column c from the remaining rows
            let others: Vec<usize> = std::mem::take(&mut cols[c])
                .into_iter()
                .filter(|&i| i != r)
                .collect();
            for i in others {
                let row = &mut rows[i];
                let k = row.iter().position(|&(j, _)| j == c).expect("pattern in sync");
                let (_, a_ic) = row.swap_remove(k);
                let mult = a_ic / diag;
                f.l_idx.push(i);
                f.l_val.push(mult);
                for (s, &(j, _)) in row.iter().enumerate() {
                    slot[j] = s;
                }
                for &(j, v) in &pivot_row {
                    if j == c {
                        continue;
                    }
                    if slot[j] != usize::MAX {
                        row[slot[j]].1 -= mult * v;
                    } else {
                        slot[j] = row.len();
                        row.push((j, -mult * v));
                        cols[j].push(i);
                    }
                }
                for &(j, _) in row.iter() {
                    slot[j] = usize::MAX;
                }
                if row.len() == 1 {
                    row_singles.push(i);
                }
            }
            f.l_start.push(f.l_idx.len());
        }

        if f.piv_row.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|&j| col_active[j]).collect(),
                rows: (0..m).filter(|&i| row_active[i]).collect(),
            });
        }
        f.build_transposes();
        Ok(f)
    }

    fn build_transposes(&mut self) {
        let m = self.m;
        let mut col_pivot = vec![0; m];
        let mut row_pivot = vec![0; m];
        for k in 0..m {
            col_pivot[self.piv_col[k]] = k;
            row_pivot[self.piv_row[k]] = k;
        }
        let u: Vec<(usize, usize, f64)> = (0..m)
            .flat_map(|k| {
                (self.u_start[k]..self.u_start[k + 1])
                    .map(move |p| (k, p))
            })
            .map(|(k, p)| (col_pivot[self.u_idx[p]], self.piv_row[k], self.u_val[p]))
            .collect();
        (self.ut_start, self.ut_idx, self.ut_val) = bucket(m, u);
        let l: Vec<(usize, usize, f64)> = (0..m)
            .flat_map(|k| (self.l_start[k]..self.l_start[k + 1]).map(move |p| (k, p)))
            .map(|(k, p)| (row_pivot[self.l_idx[p]], self.piv_row[k], self.l_val[p]))
            .collect();
        (self.lt_start, self.lt_idx, self.lt_val) = bucket(m, l);
    }

    fn pick_col_singleton(
        stack: &mut Vec<usize>,
        col_active: &[bool],
        cols: &[Vec<usize>],
        rows: &[Vec<(usize, f64)>],
    ) -> Option<(usize, usize)> {
        while let Some(c) = stack.pop() {
            if !col_active[c] || cols[c].len() != 1 {
                continue;
            }
            let r = cols[c][0];
            let v = entry(&rows[r], c);
            if v.abs() > ABS_PIVOT_TOL {
                return Some((r, c));
            }
        }
        None
    }

    fn pick_row_singleton(
        stack: &mut Vec<usize>,
        row_active: &[bool],
        rows: &[Vec<(usize, f64)>],
        cols: &[Vec<usize>],
    ) -> Option<(usize, usize)> {
        let mut deferred = Vec::new();
        let mut found = None;
        while let Some(r) = stack.pop() {
            if !row_active[r] || rows[r].len() != 1 {
                continue;
            }
            let (c, v) = rows[r][0];
            let col_max = cols[c]
                .iter()
                .map(|&i| entry(&rows[i], c).abs())
                .fold(0.0, f64::max);
            if v.abs() > ABS_PIVOT_TOL && v.abs() >= REL_PIVOT_TOL * col_max {
                found = Some((r, c));
                break;
            }
            deferred.push(r);
        }
        // unstable singletons may become acceptable later
        stack.extend(deferred);
        found
    }

    fn pick_markowitz(
        col_active: &[bool],
        cols: &[Vec<usize>],
        rows: &[Vec<(usize, f64)>],
    ) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, usize, f64)> = None; // (cost, r, c, |v|)
        for (c, pattern) in cols.iter().enumerate() {
            if !col_active[c] || pattern.is_empty() {
                continue;
            }
            let cc = pattern.len() - 1;
            if let Some((cost, ..)) = best {
                if cc * cc > cost && cost != usize::MAX {
                    // even a row singleton in this column cannot beat it
                    if cc > 0 && cost < cc {
                        continue;
                    }
                }
            }
            let col_max = pattern
                .iter()
                .map(|&i| entry(&rows[i], c).abs())
                .fold(0.0, f64::max);
            if col_max <= ABS_PIVOT_TOL {
                continue;
            }
            for &i in pattern {
                let v = entry(&rows[i], c).abs();
                if v < REL_PIVOT_TOL * col_max || v <= ABS_PIVOT_TOL {
                    continue;
                }
                let cost = (rows[i].len() - 1) * cc;
                let better = match best {
                    None => true,
                    Some((bc, _, _, bv)) => cost < bc || (cost == bc && v > bv),
                };
                if better {
                    best = Some((cost, i, c, v));
                }
            }
            if let Some((0, ..)) = best {
                break;
            }
        }
        best.map(|(_, r, c, _)| (r, c))
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn num_updates(&self) -> usize {
        self.eta_pos.len()
    }

    pub fn fill(&self) -> usize {
        self.u_idx.len() + self.l_idx.len() + self.eta_idx.len()
    }

    /// Solves `B x = b` in place; `b` is indexed by row on entry and by basis
    /// position on return.
    pub fn ftran(&self, b: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let br = b[self.piv_row[k]];
            if br != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[p]] -= self.l_val[p] * br;
                }
            }
        }
        let x = work;
        for k in (0..m).rev() {
            let xk = b[self.piv_row[k]] / self.u_diag[k];
            x[self.piv_col[k]] = xk;
            if xk != 0.0 {
                for p in self.ut_start[k]..self.ut_start[k + 1] {
                    b[self.ut_idx[p]] -= self.ut_val[p] * xk;
                }
            }
        }
        b.copy_from_slice(x);
        for e in 0..self.eta_pos.len() {
            let p = self.eta_pos[e];
            let xp = b[p] / self.eta_piv[e];
            b[p] = xp;
            if xp != 0.0 {
                for q in self.eta_start[e]..self.eta_start[e + 1] {
                    b[self.eta_idx[q]] -= self.eta_val[q] * xp;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place; `c` is indexed by basis position on entry
    /// and by row on return.
    pub fn btran(&self, c: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for e in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[e];
            let mut s = c[p];
            for q in self.eta_start[e]..self.eta_start[e + 1] {
                s -= self.eta_val[q] * c[self.eta_idx[q]];
            }
            c[p] = s / self.eta_piv[e];
        }
        let z = work;
        for k in 0..m {
            let zr = c[self.piv_col[k]] / self.u_diag[k];
            z[self.piv_row[k]] = zr;
            if zr != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[p]] -= self.u_val[p] * zr;
                }
            }
        }
        for k in (0..m).rev() {
            let zr = z[self.piv_row[k]];
            if zr != 0.0 {
                for p in self.lt_start[k]..self.lt_start[k + 1] {
                    z[self.lt_idx[p]] -= self.lt_val[p] * zr;
                }
            }
        }
        c.copy_from_slice(z);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image (indexed by position) is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_piv.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

/// Compressed storage of `(key, index, value)` triples grouped by key.
fn bucket(m: usize, mut items: Vec<(usize, usize, f64)>) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    items.sort_by_key(|&(k, i, _)| (k, i));
    let mut start = vec![0; m + 1];
    for &(k, ..) in &items {
        start[k + 1] += 1;
    }
    for k in 0..m {
        start[k + 1] += start[k];
    }
    let idx = items.iter().map(|t| t.1).collect();
    let val = items.iter().map(|t| t.2).collect();
    (start, idx, val)
}

fn entry(row: &[(usize, f64)], col: usize) -> f64 {
    row.iter()
        .find(|&&(j, _)| j == col)
        .map(|&(_, v)| v)
        .unwrap_or(0.0)
}

fn remove_item(v: &mut Vec<usize>, item: usize) {
    if let Some(k) = v.iter().position(|&x| x == item) {
        v.swap_remove(k);
    }
}
