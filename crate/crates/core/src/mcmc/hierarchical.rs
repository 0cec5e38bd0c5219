//! Grouped hierarchical mean model
//! `μ = Σ_m α_m W_m + B β C` with `α ~ N(0, V_α)` and
//! `β ~ Mat-N(0, I_κ, (τ_β diag(s))^{-1})`, where `C` assigns each response
//! coordinate to one of `K` groups and `s_k` is the size of group `k`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{metadata, Chain, LatentSweeper, SamplerConfig, ALPHA_STREAM, BETA_STREAM};
use crate::constraints::ConstraintSystem;
use crate::distributions::{cholesky_factor, SeededStream};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HierarchicalSpec {
    /// Fixed `n × d` designs `W_m`.
    pub w: Vec<DMatrix<f64>>,
    /// `n × κ` design, typically a spline basis in time.
    pub b: DMatrix<f64>,
    /// Group of each response coordinate (the one-hot columns of `C`).
    pub groups: Vec<usize>,
    pub num_groups: usize,
    /// `M × M` prior covariance of `α`.
    pub v_alpha: DMatrix<f64>,
    pub tau_beta: f64,
}

impl HierarchicalSpec {
    pub fn new(
        w: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        groups: Vec<usize>,
        num_groups: usize,
        v_alpha: DMatrix<f64>,
        tau_beta: f64,
    ) -> Result<Self> {
        let spec = HierarchicalSpec { w, b, groups, num_groups, v_alpha, tau_beta };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the spec from an explicit `K × d` matrix `C` whose columns are
    /// one-hot.
    pub fn from_grouping_matrix(
        w: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        c: &DMatrix<f64>,
        v_alpha: DMatrix<f64>,
        tau_beta: f64,
    ) -> Result<Self> {
        let mut groups = Vec::with_capacity(c.ncols());
        for j in 0..c.ncols() {
            let col = c.column(j);
            let ones: Vec<usize> = (0..c.nrows()).filter(|&k| col[k] == 1.0).collect();
            if ones.len() != 1 || col.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidConfig(format!("column {j} of C is not one-hot")));
            }
            groups.push(ones[0]);
        }
        HierarchicalSpec::new(w, b, groups, c.nrows(), v_alpha, tau_beta)
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn d(&self) -> usize {
        self.groups.len()
    }

    pub fn kappa(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_alpha(&self) -> usize {
        self.w.len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_groups];
        for &g in &self.groups {
            if g < self.num_groups {
                s[g] += 1;
            }
        }
        s
    }

    /// The `K × d` one-hot matrix.
    pub fn grouping_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.num_groups, self.d());
        for (j, &g) in self.groups.iter().enumerate() {
            c[(g, j)] = 1.0;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.n(), self.d());
        if let Some(&g) = self.groups.iter().find(|&&g| g >= self.num_groups) {
            return Err(Error::IndexOutOfRange { index: g, dim: self.num_groups });
        }
        if let Some(k) = self.group_sizes().iter().position(|&s| s == 0) {
            return Err(Error::GroupEmpty(k));
        }
        for (m, w) in self.w.iter().enumerate() {
            if w.shape() != (n, d) {
                return Err(Error::ShapeMismatch(format!("W_{} is {:?}, expected {:?}", m + 1, w.shape(), (n, d))));
            }
        }
        let m = self.w.len();
        if self.v_alpha.shape() != (m, m) {
            return Err(Error::ShapeMismatch(format!("V_alpha must be {m} x {m}")));
        }
        if m > 0 {
            cholesky_factor(&self.v_alpha)?;
        }
        if !(self.tau_beta > 0.0) {
            return Err(Error::InvalidConfig("tau_beta must be positive".into()));
        }
        Ok(())
    }

    /// `Σ_m α_m W_m`, `n × d`.
    pub fn alpha_part(&self, alpha: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n(), self.d());
        for (w, &a) in self.w.iter().zip(alpha) {
            out += w * a;
        }
        out
    }

    /// `B β C`, `n × d`.
    pub fn beta_part(&self, beta: &DMatrix<f64>) -> DMatrix<f64> {
        let bb = &self.b * beta;
        DMatrix::from_fn(self.n(), self.d(), |i, j| bb[(i, self.groups[j])])
    }

    pub fn mean(&self, alpha: &[f64], beta: &DMatrix<f64>) -> DMatrix<f64> {
        self.alpha_part(alpha) + self.beta_part(beta)
    }
}

/// Cached pieces of the grouped `β` conditional.
#[derive(Debug, Clone)]
pub struct GroupedBetaPosterior {
    /// `(BᵀB + τ_β I)^{-1} Bᵀ`.
    projector: DMatrix<f64>,
    /// Lower factor of `(BᵀB + τ_β I)^{-1}`.
    factor: DMatrix<f64>,
    groups: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupedBetaPosterior {
    pub fn new(spec: &HierarchicalSpec) -> Result<Self> {
        let kappa = spec.kappa();
        let gram = spec.b.transpose() * &spec.b + DMatrix::identity(kappa, kappa) * spec.tau_beta;
        let inv = nalgebra::Cholesky::new(gram).ok_or(Error::NotPositiveDefinite)?.inverse();
        Ok(GroupedBetaPosterior {
            projector: &inv * spec.b.transpose(),
            factor: cholesky_factor(&inv)?,
            groups: spec.groups.clone(),
            sizes: spec.group_sizes(),
        })
    }

    /// Conditional mean: column `k` is the average of the columns of
    /// `Q = (BᵀB + τ_β I)^{-1} Bᵀ R` over group `k`.
    pub fn mean(&self, residual: &DMatrix<f64>) -> DMatrix<f64> {
        let q = &self.projector * residual;
        let mut m = DMatrix::zeros(q.nrows(), self.sizes.len());
        for (j, &g) in self.groups.iter().enumerate() {
            let mut col = m.column_mut(g);
            col += q.column(j);
        }
        for (k, &s) in self.sizes.iter().enumerate() {
            let mut col = m.column_mut(k);
            col /= s as f64;
        }
        m
    }

    /// Conditional standard deviation of `β_{r,k}`.
    pub fn sd(&self, r: usize, k: usize) -> f64 {
        self.factor.row(r).norm() / (self.sizes[k] as f64).sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, residual: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
        let mut beta = self.mean(residual);
        let kappa = beta.nrows();
        for (k, &s) in self.sizes.iter().enumerate() {
            let z = DVector::from_fn(kappa, |_, _| StandardNormal.sample(rng));
            let noise = &self.factor * z / (s as f64).sqrt();
            let mut col = beta.column_mut(k);
            col += noise;
        }
        beta
    }
}

/// Draws the `κ × K` matrix `β` given `α` and the latents (`n × d`).
pub fn sample_grouped_beta<R: Rng + ?Sized>(
    spec: &HierarchicalSpec,
    posterior: &GroupedBetaPosterior,
    zeta: &DMatrix<f64>,
    alpha: &[f64],
    rng: &mut R,
) -> DMatrix<f64> {
    posterior.sample(&(zeta - spec.alpha_part(alpha)), rng)
}

/// Cached conditional of `α`: precision `Γ + V_α^{-1}` with
/// `Γ_st = tr(W_sᵀ W_t)`.
#[derive(Debug, Clone)]
pub struct AlphaPosterior {
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl AlphaPosterior {
    pub fn new(spec: &HierarchicalSpec) -> Result<Self> {
        let m = spec.num_alpha();
        let v_inv = nalgebra::Cholesky::new(spec.v_alpha.clone()).ok_or(Error::NotPositiveDefinite)?.inverse();
        let gamma = DMatrix::from_fn(m, m, |s, t| spec.w[s].dot(&spec.w[t]));
        let cov = nalgebra::Cholesky::new(gamma + v_inv).ok_or(Error::NotPositiveDefinite)?.inverse();
        let factor = cholesky_factor(&cov)?;
        Ok(AlphaPosterior { cov, factor })
    }

    pub fn sample<R: Rng + ?Sized>(&self, spec: &HierarchicalSpec, residual: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
        let m = spec.num_alpha();
        let gamma = DVector::from_fn(m, |i, _| spec.w[i].dot(residual));
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        (&self.cov * gamma + &self.factor * z).iter().copied().collect()
    }
}

/// Draws `α` given `β` and the latents.
pub fn sample_alpha<R: Rng + ?Sized>(
    spec: &HierarchicalSpec,
    posterior: &AlphaPosterior,
    zeta: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<f64> {
    posterior.sample(spec, &(zeta - spec.beta_part(beta)), rng)
}

/// Gibbs sampler over `(ζ, β, α)`; retained rows hold `β` (`κ × K`,
/// row-major) followed by `α`.
pub fn run_hierarchical_chain(
    spec: &HierarchicalSpec,
    y: &[Vec<u8>],
    cs: &ConstraintSystem,
    config: &SamplerConfig,
) -> Result<Chain> {
    config.validate()?;
    spec.validate()?;
    if spec.n() != y.len() || spec.d() != cs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model is {} x {}, data is {} x {}",
            spec.n(),
            spec.d(),
            y.len(),
            cs.dim()
        )));
    }
    if let Some(i) = y.iter().position(|row| !cs.is_feasible(row)) {
        return Err(Error::InfeasibleRow(i));
    }
    let start = Instant::now();
    let d = cs.dim();
    let beta_post = GroupedBetaPosterior::new(spec)?;
    let alpha_post = if spec.num_alpha() > 0 { Some(AlphaPosterior::new(spec)?) } else { None };
    let mut sweeper = LatentSweeper::new(y, cs, config)?;
    let mut beta_rng = SeededStream::new(config.seed, BETA_STREAM).rng();
    let mut alpha_rng = SeededStream::new(config.seed, ALPHA_STREAM).rng();
    let mut beta = DMatrix::zeros(spec.kappa(), spec.num_groups);
    let mut alpha = vec![0.0; spec.num_alpha()];
    let mut chain = Chain::new(spec.kappa(), spec.num_groups, spec.num_alpha(), metadata(config, &sweeper, d, start));

    for iter in 1..=config.iterations {
        let means = spec.mean(&alpha, &beta).transpose();
        sweeper.sweep(y, &means, cs)?;
        if iter % 100 == 0 {
            log::info!("iteration {iter}/{}", config.iterations);
        }
        let zeta = sweeper.stacked();
        beta = sample_grouped_beta(spec, &beta_post, &zeta, &alpha, &mut beta_rng);
        if let Some(post) = &alpha_post {
            alpha = sample_alpha(spec, post, &zeta, &beta, &mut alpha_rng);
        }
        if iter <= config.burnin {
            sweeper.maybe_adapt(iter);
            if iter == config.burnin {
                sweeper.end_burnin();
            }
        } else if (iter - config.burnin) % config.thin == 0 {
            chain.push(iter, &beta, &alpha);
        }
    }
    chain.metadata = metadata(config, &sweeper, d, start);
    Ok(chain)
}
