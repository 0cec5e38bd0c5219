//! The dual polytope `U(y, ζ)` and the exponential-kernel law on it.
//!
//! For a feasible `y`, `U(y, ζ)` collects the row multipliers `u` with
//! `u_k = 0` on inactive rows, `u_k > 0` on active rows, and the strict
//! thresholding inequalities `A'_{.j}u < ζ_j` where `y_j = 1` and
//! `A'_{.j}u > ζ_j` where `y_j = 0`. The free coordinates (active rows)
//! carry density `∝ exp(-Σ u_k)`; the normalizing constant is never needed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constraints::ConstraintSystem;
use crate::distributions::sample_truncated_exponential;
use crate::error::{Error, Result};
use crate::lp::{self, SparseColumns};

/// Minimum slack for a point returned by [`DualPolytope::find_interior_point`].
pub const INTERIOR_MARGIN: f64 = 1e-6;

/// Tuning for the `u` samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolytopeSettings {
    /// Coordinates are truncated at this magnitude.
    pub bound_cap: f64,
    /// Use rejection sampling when at most this many rows are active.
    pub rejection_threshold: usize,
    /// Proposals before rejection sampling gives up.
    pub max_proposals: usize,
    /// Hit-and-run moves per draw.
    pub hitrun_steps: usize,
}

impl Default for PolytopeSettings {
    fn default() -> Self {
        PolytopeSettings { bound_cap: 1e5, rejection_threshold: 3, max_proposals: 1_000_000, hitrun_steps: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct DualPolytope<'a> {
    cs: &'a ConstraintSystem,
    y: Vec<u8>,
    zeta: Vec<f64>,
    active: Vec<usize>,
    inactive: Vec<usize>,
    bound_cap: f64,
}

impl<'a> DualPolytope<'a> {
    pub fn new(y: &[u8], zeta: &[f64], cs: &'a ConstraintSystem) -> Result<Self> {
        if y.len() != cs.dim() || zeta.len() != cs.dim() {
            return Err(Error::DimensionMismatch("y and zeta must have length d".into()));
        }
        if !cs.is_feasible(y) {
            return Err(Error::InfeasibleY);
        }
        let slack = cs.slack(y);
        let (active, inactive): (Vec<usize>, Vec<usize>) = (0..cs.num_rows()).partition(|&k| slack[k] == 0);
        Ok(DualPolytope { cs, y: y.to_vec(), zeta: zeta.to_vec(), active, inactive, bound_cap: 1e5 })
    }

    pub fn with_bound_cap(mut self, cap: f64) -> Self {
        self.bound_cap = cap;
        self
    }

    pub fn bound_cap(&self) -> f64 {
        self.bound_cap
    }

    pub fn active_rows(&self) -> &[usize] {
        &self.active
    }

    pub fn inactive_rows(&self) -> &[usize] {
        &self.inactive
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        self.cs
    }

    fn sign(&self, j: usize) -> f64 {
        if self.y[j] == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Slack of the thresholding inequality for coordinate `j`; positive
    /// inside the polytope.
    pub fn threshold_slack(&self, j: usize, u: &[f64]) -> f64 {
        self.sign(j) * (self.zeta[j] - self.cs.column_dot(j, u))
    }

    /// Smallest slack over thresholding inequalities and active
    /// coordinates; `-inf` when an inactive coordinate is nonzero.
    pub fn min_slack(&self, u: &[f64]) -> f64 {
        if self.inactive.iter().any(|&k| u[k] != 0.0) {
            return f64::NEG_INFINITY;
        }
        let rows = self.active.iter().map(|&k| u[k]);
        let thresholds = (0..self.y.len()).map(|j| self.threshold_slack(j, u));
        rows.chain(thresholds).fold(f64::INFINITY, f64::min)
    }

    /// Strict membership test for `u ∈ U(y, ζ)`.
    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.cs.num_rows() && self.min_slack(u) > 0.0
    }

    /// Maximizes the minimum slack `t` (capped at 1) over `u`. With
    /// `strict_positive` the active coordinates also count as slacks;
    /// otherwise they only need to be nonnegative.
    pub fn max_min_slack(&self, strict_positive: bool) -> Result<(Vec<f64>, f64)> {
        let f = self.active.len();
        let d = self.y.len();
        let mut local = vec![usize::MAX; self.cs.num_rows()];
        for (i, &k) in self.active.iter().enumerate() {
            local[k] = i;
        }
        // variables: u_active (f), t; rows: d thresholds, then f positivity rows
        let nrows = d + if strict_positive { f } else { 0 };
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); f + 1];
        let mut rhs = Vec::with_capacity(nrows);
        for j in 0..d {
            let s = self.sign(j);
            for &(k, c) in self.cs.column(j) {
                if local[k] != usize::MAX {
                    cols[local[k]].push((j, s * c as f64));
                }
            }
            cols[f].push((j, 1.0));
            rhs.push(s * self.zeta[j]);
        }
        if strict_positive {
            for i in 0..f {
                cols[i].push((d + i, -1.0));
                cols[f].push((d + i, 1.0));
                rhs.push(0.0);
            }
        }
        let big = 1.0 + self.zeta.iter().fold(0.0f64, |a, z| a.max(z.abs()));
        let mut lower = vec![0.0; f + 1];
        let mut upper = vec![self.bound_cap; f + 1];
        lower[f] = -big;
        upper[f] = 1.0;
        let mut objective = vec![0.0; f + 1];
        objective[f] = 1.0;
        let source = SparseColumns { rows: nrows, cols };
        let sol = lp::maximize(&source, &objective, &rhs, &lower, &upper)?;
        let mut u = vec![0.0; self.cs.num_rows()];
        for (i, &k) in self.active.iter().enumerate() {
            u[k] = sol.x[i].max(0.0);
        }
        Ok((u, sol.x[f]))
    }

    /// A point with slack at least [`INTERIOR_MARGIN`], or `None` when the
    /// polytope is empty (or thinner than the margin).
    pub fn find_interior_point(&self) -> Option<Vec<f64>> {
        let (u, t) = self.max_min_slack(true).ok()?;
        (t > INTERIOR_MARGIN && self.contains(&u)).then_some(u)
    }

    /// Coordinate-wise bounds `(lo, hi)` on the active coordinates implied by
    /// inequalities that involve a single coordinate with the limiting sign.
    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let f = self.active.len();
        let mut local = vec![usize::MAX; self.cs.num_rows()];
        for (i, &k) in self.active.iter().enumerate() {
            local[k] = i;
        }
        let mut lo = vec![0.0f64; f];
        let mut hi = vec![self.bound_cap; f];
        for j in 0..self.y.len() {
            // constraint c'u < r over the active coordinates
            let s = self.sign(j);
            let r = s * self.zeta[j];
            let mut neg = None;
            let mut negs = 0;
            let mut any = false;
            for &(k, c) in self.cs.column(j) {
                let i = local[k];
                if i == usize::MAX {
                    continue;
                }
                any = true;
                if s * (c as f64) < 0.0 {
                    negs += 1;
                    neg = Some(i);
                }
            }
            if !any {
                if r <= 0.0 {
                    return None;
                }
            } else if negs == 0 {
                for &(k, _) in self.cs.column(j) {
                    if local[k] != usize::MAX {
                        hi[local[k]] = hi[local[k]].min(r);
                    }
                }
            } else if negs == 1 {
                let i = neg.unwrap();
                lo[i] = lo[i].max(-r);
            }
        }
        lo.iter().zip(&hi).all(|(l, h)| l < h).then_some((lo, hi))
    }

    /// Exact draw by rejection: proposals are independent truncated unit
    /// exponentials on the bounding box of the free coordinates.
    pub fn sample_u_rejection<R: Rng + ?Sized>(&self, max_proposals: usize, rng: &mut R) -> Result<Vec<f64>> {
        let m = self.cs.num_rows();
        let mut u = vec![0.0; m];
        if self.active.is_empty() {
            return if self.contains(&u) { Ok(u) } else { Err(Error::NotInterior) };
        }
        let (lo, hi) = self.bounding_box().ok_or(Error::NotInterior)?;
        for _ in 0..max_proposals {
            for (i, &k) in self.active.iter().enumerate() {
                u[k] = sample_truncated_exponential(1.0, lo[i], hi[i], rng)?;
            }
            if self.contains(&u) {
                return Ok(u);
            }
        }
        Err(Error::RejectionBudgetExhausted(max_proposals))
    }

    /// Hit-and-run targeting `exp(-Σ u_k)` on the polytope. Each move picks a
    /// uniform direction on the active coordinates oriented so the kernel's
    /// rate along it is positive, then draws the step from the truncated
    /// shifted exponential on the chord.
    pub fn sample_u_hitrun<R: Rng + ?Sized>(&self, start: &[f64], steps: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.walk(start, steps, rng, |_| {})
    }

    /// Hit-and-run that reports every intermediate point.
    pub fn walk<R: Rng + ?Sized, F: FnMut(&[f64])>(
        &self,
        start: &[f64],
        steps: usize,
        rng: &mut R,
        mut visit: F,
    ) -> Result<Vec<f64>> {
        if !self.contains(start) {
            return Err(Error::NotInterior);
        }
        let mut u = start.to_vec();
        if self.active.is_empty() {
            return Ok(u);
        }
        let m = self.cs.num_rows();
        let mut v = vec![0.0; m];
        let mut trial = vec![0.0; m];
        for _ in 0..steps {
            let rate = loop {
                let mut norm = 0.0;
                for &k in &self.active {
                    let g: f64 = StandardNormal.sample(rng);
                    v[k] = g;
                    norm += g * g;
                }
                let norm = norm.sqrt();
                let mut sum = 0.0;
                for &k in &self.active {
                    v[k] /= norm;
                    sum += v[k];
                }
                if sum == 0.0 || !sum.is_finite() {
                    continue;
                }
                if sum < 0.0 {
                    for &k in &self.active {
                        v[k] = -v[k];
                    }
                }
                break sum.abs();
            };
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for j in 0..self.y.len() {
                let slack = self.threshold_slack(j, &u);
                let r = self.sign(j) * self.cs.column_dot(j, &v);
                if r > 0.0 {
                    hi = hi.min(slack / r);
                } else if r < 0.0 {
                    lo = lo.max(slack / r);
                }
            }
            for &k in &self.active {
                let vk = v[k];
                if vk > 0.0 {
                    lo = lo.max(-u[k] / vk);
                    hi = hi.min((self.bound_cap - u[k]) / vk);
                } else if vk < 0.0 {
                    hi = hi.min(-u[k] / vk);
                    lo = lo.max((self.bound_cap - u[k]) / vk);
                }
            }
            if !(lo < hi) {
                continue;
            }
            let step = sample_truncated_exponential(rate, lo, hi, rng)?;
            for &k in &self.active {
                trial[k] = u[k] + step * v[k];
            }
            // rounding at the chord ends can leave the open set; stay put then
            if self.contains(&trial) {
                std::mem::swap(&mut u, &mut trial);
            }
            trial.copy_from_slice(&u);
            visit(&u);
        }
        Ok(u)
    }

    /// Draws from the exponential-kernel law: zero when no row is active,
    /// rejection for few active rows, hit-and-run otherwise or when rejection
    /// runs out of proposals. `start` must lie in the polytope when given.
    pub fn sample_u<R: Rng + ?Sized>(
        &self,
        start: Option<&[f64]>,
        settings: &PolytopeSettings,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if self.active.is_empty() {
            let zero = vec![0.0; self.cs.num_rows()];
            return if self.contains(&zero) { Ok(zero) } else { Err(Error::NotInterior) };
        }
        if self.active.len() <= settings.rejection_threshold {
            match self.sample_u_rejection(settings.max_proposals, rng) {
                Err(Error::RejectionBudgetExhausted(_)) => {}
                other => return other,
            }
        }
        let start = match start {
            Some(s) => s.to_vec(),
            None => self.find_interior_point().ok_or(Error::NotInterior)?,
        };
        self.sample_u_hitrun(&start, settings.hitrun_steps, rng)
    }
}

/// `ζ̃_j = max(ζ_j, ζ*_j)` where `y_j = 1`, `min` otherwise.
pub fn envelope_zeta(y: &[u8], zeta: &[f64], zeta_star: &[f64]) -> Vec<f64> {
    y.iter().zip(zeta.iter().zip(zeta_star)).map(|(&yj, (&a, &b))| if yj == 1 { a.max(b) } else { a.min(b) }).collect()
}

/// `U(y, ζ̃)`, which contains both `U(y, ζ)` and `U(y, ζ*)`.
pub fn envelope_polytope<'a>(
    y: &[u8],
    zeta: &[f64],
    zeta_star: &[f64],
    cs: &'a ConstraintSystem,
) -> Result<DualPolytope<'a>> {
    DualPolytope::new(y, &envelope_zeta(y, zeta, zeta_star), cs)
}
