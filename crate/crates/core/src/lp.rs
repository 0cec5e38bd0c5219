//! Bounded-variable primal simplex.
//!
//! Solves `max c'x` subject to `Ax ≤ b` and `l ≤ x ≤ u` with finite lower
//! bounds. Rows receive slack variables; rows violated at `x = l` receive an
//! artificial variable and a phase-one objective. Pricing and the ratio test
//! follow Bland's rule, so the method terminates on degenerate problems. The
//! basis inverse is kept dense and refactorized periodically.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERATIONS: usize = 100_000;

/// Column access for the constraint matrix.
pub trait ColumnSource {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    fn for_each_entry<F: FnMut(usize, f64)>(&self, col: usize, f: F);
}

/// Sparse columns stored as `(row, value)` lists.
#[derive(Debug, Clone, Default)]
pub struct SparseColumns {
    pub rows: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
}

impl SparseColumns {
    pub fn from_dense(a: &[Vec<f64>], ncols: usize) -> Self {
        let mut cols = vec![Vec::new(); ncols];
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        SparseColumns { rows: a.len(), cols }
    }
}

impl ColumnSource for SparseColumns {
    fn num_rows(&self) -> usize {
        self.rows
    }
    fn num_cols(&self) -> usize {
        self.cols.len()
    }
    fn for_each_entry<F: FnMut(usize, f64)>(&self, col: usize, mut f: F) {
        for &(r, v) in &self.cols[col] {
            f(r, v);
        }
    }
}

impl ColumnSource for crate::constraints::ConstraintSystem {
    fn num_rows(&self) -> usize {
        crate::constraints::ConstraintSystem::num_rows(self)
    }
    fn num_cols(&self) -> usize {
        self.dim()
    }
    fn for_each_entry<F: FnMut(usize, f64)>(&self, col: usize, mut f: F) {
        for &(r, v) in self.column(col) {
            f(r, v as f64);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Values of the structural variables.
    pub x: Vec<f64>,
    /// Row multipliers; nonnegative at an optimum of a maximization.
    pub duals: Vec<f64>,
    pub objective: f64,
    /// Reduced costs of structurals followed by slacks.
    pub reduced_costs: Vec<f64>,
    /// Whether each structural or slack variable ended nonbasic.
    pub nonbasic: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Tableau<'a, C: ColumnSource> {
    source: &'a C,
    m: usize,
    n: usize,
    // artificial variable k lives on row art_rows[k]
    art_rows: Vec<usize>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    rhs: &'a [f64],
    pivots_since_refactor: usize,
}

impl<'a, C: ColumnSource> Tableau<'a, C> {
    fn total(&self) -> usize {
        self.n + self.m + self.art_rows.len()
    }

    fn for_column<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        if j < self.n {
            self.source.for_each_entry(j, f);
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            f(self.art_rows[j - self.n - self.m], -1.0);
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    pi[k] += cb * row[k];
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], pi: &[f64]) -> f64 {
        let mut dj = cost[j];
        self.for_column(j, |r, v| dj -= pi[r] * v);
        dj
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_column(j, |r, v| {
            for i in 0..m {
                alpha[i] += self.binv[i * m + r] * v;
            }
        });
        alpha
    }

    fn pivot(&mut self, row: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[row];
        for k in 0..m {
            self.binv[row * m + k] /= p;
        }
        for i in 0..m {
            if i != row && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[row * m + k];
                }
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Rebuilds the basis inverse from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            self.for_column(j, |r, v| bmat[r * m + i] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let p = (k..m).max_by(|&a, &b| bmat[a * m + k].abs().total_cmp(&bmat[b * m + k].abs())).unwrap();
            if bmat[p * m + k].abs() < 1e-12 {
                return Err(Error::DegenerateInput("singular basis".into()));
            }
            if p != k {
                for c in 0..m {
                    bmat.swap(k * m + c, p * m + c);
                    inv.swap(k * m + c, p * m + c);
                }
            }
            let piv = bmat[k * m + k];
            for c in 0..m {
                bmat[k * m + c] /= piv;
                inv[k * m + c] /= piv;
            }
            for r in 0..m {
                if r != k {
                    let f = bmat[r * m + k];
                    if f != 0.0 {
                        for c in 0..m {
                            bmat[r * m + c] -= f * bmat[k * m + c];
                            inv[r * m + c] -= f * inv[k * m + c];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r: Vec<f64> = self.rhs.to_vec();
        for j in 0..self.total() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |row, v| r[row] -= v * xj);
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<()> {
        for _ in 0..MAX_ITERATIONS {
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let pi = self.duals(cost);
            // Bland: lowest-index improving column
            let mut entering = None;
            for j in 0..self.total() {
                if self.status[j] == Status::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let dj = self.reduced_cost(j, cost, &pi);
                if (self.status[j] == Status::Lower && dj > OPT_TOL)
                    || (self.status[j] == Status::Upper && dj < -OPT_TOL)
                {
                    entering = Some(j);
                    break;
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };
            let dir = if self.status[q] == Status::Lower { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);

            let mut theta = self.up[q] - self.lo[q];
            let mut leave: Option<(usize, Status)> = None;
            for i in 0..self.m {
                let rate = -dir * alpha[i];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, bound) = if rate < 0.0 {
                    ((self.x[b] - self.lo[b]) / -rate, Status::Lower)
                } else if self.up[b].is_finite() {
                    ((self.up[b] - self.x[b]) / rate, Status::Upper)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                // ties go to the bound flip, then to the lowest basic index
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    leave.is_some_and(|(r, _)| b < self.basis[r])
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some((i, bound));
                }
            }
            if !theta.is_finite() {
                return Err(Error::Unbounded);
            }
            self.x[q] += dir * theta;
            for i in 0..self.m {
                let b = self.basis[i];
                self.x[b] -= dir * theta * alpha[i];
            }
            match leave {
                None => {
                    self.status[q] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                }
                Some((row, bound)) => {
                    let out = self.basis[row];
                    self.status[out] = bound;
                    self.x[out] = if bound == Status::Lower { self.lo[out] } else { self.up[out] };
                    self.pivot(row, &alpha);
                    self.basis[row] = q;
                    self.status[q] = Status::Basic;
                }
            }
        }
        Err(Error::IterationLimit)
    }

    /// Replaces basic artificials by structural or slack columns where possible.
    fn drive_out_artificials(&mut self) {
        let first_art = self.n + self.m;
        for row in 0..self.m {
            if self.basis[row] < first_art {
                continue;
            }
            for j in 0..first_art {
                if self.status[j] == Status::Basic {
                    continue;
                }
                let alpha = self.ftran(j);
                if alpha[row].abs() > 1e-7 {
                    let out = self.basis[row];
                    self.status[out] = Status::Lower;
                    self.x[out] = 0.0;
                    self.pivot(row, &alpha);
                    self.basis[row] = j;
                    self.status[j] = Status::Basic;
                    break;
                }
            }
        }
        self.recompute_basic_values();
    }
}

/// Maximizes `objective'x` subject to `Ax ≤ rhs`, `lower ≤ x ≤ upper`.
pub fn maximize<C: ColumnSource>(
    source: &C,
    objective: &[f64],
    rhs: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution> {
    let n = source.num_cols();
    let m = source.num_rows();
    if objective.len() != n || lower.len() != n || upper.len() != n || rhs.len() != m {
        return Err(Error::DimensionMismatch("linear program inputs disagree".into()));
    }
    // residual at x = lower
    let mut resid = rhs.to_vec();
    for j in 0..n {
        if lower[j] != 0.0 {
            let l = lower[j];
            source.for_each_entry(j, |r, v| resid[r] -= v * l);
        }
    }
    let art_rows: Vec<usize> = (0..m).filter(|&i| resid[i] < 0.0).collect();
    let total = n + m + art_rows.len();
    let mut lo = vec![0.0; total];
    let mut up = vec![f64::INFINITY; total];
    lo[..n].copy_from_slice(lower);
    up[..n].copy_from_slice(upper);
    let mut x = vec![0.0; total];
    x[..n].copy_from_slice(lower);
    let mut status = vec![Status::Lower; total];
    let mut basis = vec![0; m];
    let mut binv = vec![0.0; m * m];
    let mut art_of_row = vec![usize::MAX; m];
    for (k, &r) in art_rows.iter().enumerate() {
        art_of_row[r] = n + m + k;
    }
    for i in 0..m {
        if art_of_row[i] == usize::MAX {
            basis[i] = n + i;
            x[n + i] = resid[i];
            binv[i * m + i] = 1.0;
        } else {
            basis[i] = art_of_row[i];
            x[art_of_row[i]] = -resid[i];
            binv[i * m + i] = -1.0;
        }
        status[basis[i]] = Status::Basic;
    }
    let mut t = Tableau { source, m, n, art_rows, lo, up, x, status, basis, binv, rhs, pivots_since_refactor: 0 };

    if !t.art_rows.is_empty() {
        let mut phase1 = vec![0.0; total];
        for c in phase1.iter_mut().skip(n + m) {
            *c = -1.0;
        }
        t.run(&phase1)?;
        t.recompute_basic_values();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let infeasibility: f64 = t.x[n + m..].iter().sum();
        if infeasibility > 1e-9 * scale {
            return Err(Error::Infeasible);
        }
        for j in n + m..total {
            t.up[j] = 0.0;
            if t.status[j] != Status::Basic {
                t.x[j] = 0.0;
            }
        }
        t.drive_out_artificials();
    }

    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(objective);
    t.run(&cost)?;
    t.recompute_basic_values();

    let duals = t.duals(&cost);
    let reduced_costs = (0..n + m).map(|j| t.reduced_cost(j, &cost, &duals)).collect();
    let nonbasic = (0..n + m).map(|j| t.status[j] != Status::Basic).collect();
    let xs = t.x[..n].to_vec();
    let obj = xs.iter().zip(objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x: xs, duals, objective: obj, reduced_costs, nonbasic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[&[f64]], n: usize) -> SparseColumns {
        let rows: Vec<Vec<f64>> = a.iter().map(|r| r.to_vec()).collect();
        SparseColumns::from_dense(&rows, n)
    }

    #[test]
    fn simple_bounded() {
        // max x + y, x + y <= 1.5, 0 <= x,y <= 1
        let a = dense(&[&[1.0, 1.0]], 2);
        let s = maximize(&a, &[1.0, 1.0], &[1.5], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s.objective - 1.5).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn needs_phase_one() {
        // x1 + x2 = 1 via two rows, maximize x1 - x2
        let a = dense(&[&[1.0, 1.0], &[-1.0, -1.0]], 2);
        let s = maximize(&a, &[1.0, -1.0], &[1.0, -1.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let a = dense(&[&[-1.0, -1.0]], 2);
        let r = maximize(&a, &[1.0, 1.0], &[-3.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::Infeasible)));
    }

    #[test]
    fn unbounded_detected() {
        let a = dense(&[&[1.0, -1.0]], 2);
        let r = maximize(&a, &[1.0, 1.0], &[0.0], &[0.0, 0.0], &[f64::INFINITY, f64::INFINITY]);
        assert!(matches!(r, Err(Error::Unbounded)));
    }

    #[test]
    fn negative_lower_bounds() {
        // max t s.t. t <= 0.3, t in [-10, 1]
        let a = dense(&[&[1.0]], 1);
        let s = maximize(&a, &[1.0], &[0.3], &[-10.0], &[1.0]).unwrap();
        assert!((s.x[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn strong_duality_on_random_boxes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = rng.random_range(1..5);
            let n = rng.random_range(1..6);
            let rows: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.random_range(-1i32..=1) as f64).collect()).collect();
            let a = SparseColumns::from_dense(&rows, n);
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(0i32..3) as f64).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let s = maximize(&a, &c, &b, &vec![0.0; n], &vec![1.0; n]).unwrap();
            // dual objective u'b + sum (c - A'u)_+
            let mut dual = s.duals.iter().zip(&b).map(|(u, b)| u * b).sum::<f64>();
            for j in 0..n {
                let aju: f64 = (0..m).map(|i| rows[i][j] * s.duals[i]).sum();
                dual += (c[j] - aju).max(0.0);
            }
            assert!((dual - s.objective).abs() < 1e-9, "{dual} vs {}", s.objective);
            assert!(s.duals.iter().all(|&u| u > -1e-9));
        }
    }
}
