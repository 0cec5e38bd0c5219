//! Gibbs samplers for the regression model `ζ_i ~ N(βx_i, I_d)`,
//! `y_i = T(ζ_i)`, its intercept-only special case, and the grouped
//! hierarchical model.
//!
//! Each sweep updates every latent `ζ_i` by the dual-polytope move
//! ([`gibbs_update_zeta`]) and then draws the mean parameters from their
//! conjugate conditionals. Observation `i` owns generator stream `i`, so a
//! sweep may run in parallel and still produce identical chains.

mod chain;
mod hierarchical;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{Chain, ChainMetadata};
pub use hierarchical::{
    run_hierarchical_chain, sample_alpha, sample_grouped_beta, GroupedBetaPosterior, HierarchicalSpec,
};

use crate::constraints::ConstraintSystem;
use crate::distributions::{
    cholesky_factor, sample_matrix_normal_factored, sample_truncated_normal, SeededStream, StreamRng, Truncation,
};
use crate::error::{Error, Result};
use crate::polytope::{envelope_polytope, DualPolytope, PolytopeSettings};
use crate::transform::solve_transform;

/// Stream id of the `β` update; observation streams use ids below this.
pub const BETA_STREAM: u64 = 1 << 32;
/// Stream id of the `α` update in the hierarchical model.
pub const ALPHA_STREAM: u64 = (1 << 32) + 1;

/// Margin `δ` used by [`init_latent`].
pub const INIT_MARGIN: f64 = 0.5;

/// Responses `Y` (one feasible row per observation), covariates `X`
/// (`p × n`, one column per observation) and the constraint system.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<Vec<u8>>,
    x: DMatrix<f64>,
    cs: ConstraintSystem,
}

impl Dataset {
    pub fn new(y: Vec<Vec<u8>>, x: DMatrix<f64>, cs: ConstraintSystem) -> Result<Self> {
        if x.ncols() != y.len() {
            return Err(Error::DimensionMismatch(format!("X has {} columns for {} observations", x.ncols(), y.len())));
        }
        for (i, row) in y.iter().enumerate() {
            if row.len() != cs.dim() {
                return Err(Error::DimensionMismatch(format!("row {i} has length {}, d = {}", row.len(), cs.dim())));
            }
            if !cs.is_feasible(row) {
                return Err(Error::InfeasibleRow(i));
            }
        }
        Ok(Dataset { y, x, cs })
    }

    /// Intercept-only design: `p = 1` and `X` all ones.
    pub fn intercept(y: Vec<Vec<u8>>, cs: ConstraintSystem) -> Result<Self> {
        let n = y.len();
        Dataset::new(y, DMatrix::from_element(1, n, 1.0), cs)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.cs.dim()
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    pub fn responses(&self) -> &[Vec<u8>] {
        &self.y
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.cs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Prior scale: `β ~ Mat-N(0, I_d, τ I_p)`.
    pub tau: f64,
    /// Coordinates proposed jointly per latent move; `None` means
    /// `min(d, 100)`.
    pub block_size: Option<usize>,
    pub hitrun_steps: usize,
    pub seed: u64,
    pub rejection_threshold: usize,
    pub max_proposals: usize,
    pub bound_cap: f64,
    /// Halve the block size during burn-in when acceptance collapses.
    pub adapt_block_size: bool,
    /// Re-solve the transform after every latent update and count mismatches.
    pub check_identity: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let poly = PolytopeSettings::default();
        SamplerConfig {
            iterations: 10_000,
            burnin: 1_000,
            thin: 1,
            tau: 10.0,
            block_size: None,
            hitrun_steps: poly.hitrun_steps,
            seed: 0,
            rejection_threshold: poly.rejection_threshold,
            max_proposals: poly.max_proposals,
            bound_cap: poly.bound_cap,
            adapt_block_size: true,
            check_identity: cfg!(debug_assertions),
        }
    }
}

/// Largest block size allowed.
pub const MAX_BLOCK_SIZE: usize = 100;

/// Acceptance below this over an adaptation window halves the block.
const COLLAPSE_RATE: f64 = 0.01;
const ADAPT_WINDOW: usize = 100;

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.burnin >= self.iterations {
            return bad("burnin must be smaller than iterations");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if let Some(b) = self.block_size {
            if b == 0 || b > MAX_BLOCK_SIZE {
                return bad("block_size must be in 1..=100");
            }
        }
        if self.hitrun_steps == 0 {
            return bad("hitrun_steps must be positive");
        }
        if self.max_proposals == 0 || !(self.bound_cap > 0.0) {
            return bad("max_proposals and bound_cap must be positive");
        }
        Ok(())
    }

    pub fn polytope_settings(&self) -> PolytopeSettings {
        PolytopeSettings {
            bound_cap: self.bound_cap,
            rejection_threshold: self.rejection_threshold,
            max_proposals: self.max_proposals,
            hitrun_steps: self.hitrun_steps,
        }
    }

    pub fn resolved_block_size(&self, d: usize) -> usize {
        self.block_size.unwrap_or(d.min(MAX_BLOCK_SIZE)).min(d).max(1)
    }
}

/// Latent state of one observation: `ζ_i` and the last dual draw `u_i`,
/// kept as a warm start for hit-and-run.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
}

/// A latent `ζ` with `T(ζ) = y` and a dual point strictly inside
/// `U(y, ζ)`: `u_k = 1` on active rows, `ζ_j = A'_{.j}u ± δ`.
pub fn init_observation(i: usize, y: &[u8], cs: &ConstraintSystem) -> Result<Latent> {
    let slack = cs.slack(y);
    let u: Vec<f64> = slack.iter().map(|&s| if s == 0 { 1.0 } else { 0.0 }).collect();
    let zeta: Vec<f64> = (0..cs.dim())
        .map(|j| {
            let t = cs.column_dot(j, &u);
            if y[j] == 1 {
                t + INIT_MARGIN
            } else {
                t - INIT_MARGIN
            }
        })
        .collect();
    match solve_transform(&zeta, cs) {
        Ok(res) if res.y == y => Ok(Latent { zeta, u }),
        _ => Err(Error::InitFailed(i)),
    }
}

/// Initial latents for every observation; each is verified by re-solving
/// the transform.
pub fn init_latent(dataset: &Dataset) -> Result<Vec<Latent>> {
    dataset.responses().iter().enumerate().map(|(i, y)| init_observation(i, y, dataset.constraints())).collect()
}

/// One dual-polytope move for observation `i` on the coordinates in
/// `block`; returns whether the proposal was accepted.
///
/// Draws `u` from the exponential kernel on `U(y, ζ)`, proposes `ζ*_j` from
/// `N(μ_j, 1)` truncated to the side of `A'_{.j}u` that keeps `y_j`, draws
/// `u*` on the envelope `U(y, ζ̃)` and accepts when `u* ∈ U(y, ζ)`. The
/// acceptance probability is `Z(ζ)/Z(ζ̃)`, which balances the move exactly.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_update_zeta<R: Rng + ?Sized>(
    i: usize,
    latent: &mut Latent,
    y: &[u8],
    mean: &[f64],
    block: &[usize],
    cs: &ConstraintSystem,
    settings: &PolytopeSettings,
    rng: &mut R,
) -> Result<bool> {
    let poly = DualPolytope::new(y, &latent.zeta, cs)?.with_bound_cap(settings.bound_cap);
    let start = poly.contains(&latent.u).then_some(latent.u.as_slice());
    let u = poly.sample_u(start, settings, rng).map_err(|e| match e {
        Error::NotInterior => Error::EmptyDualPolytope(i),
        other => other,
    })?;

    let mut proposal = latent.zeta.clone();
    for &j in block {
        let cut = cs.column_dot(j, &u);
        let side = if y[j] == 1 { Truncation::Above(cut) } else { Truncation::Below(cut) };
        proposal[j] = sample_truncated_normal(mean[j], side, rng);
    }
    debug_assert!(DualPolytope::new(y, &proposal, cs)?.contains(&u));

    let envelope = envelope_polytope(y, &latent.zeta, &proposal, cs)?.with_bound_cap(settings.bound_cap);
    let u_star = envelope.sample_u(Some(&u), settings, rng)?;
    let accepted = poly.contains(&u_star);
    if accepted {
        latent.zeta = proposal;
    }
    latent.u = u;
    Ok(accepted)
}

/// Conjugate update of `β` given the latents: `Mat-N(ζ'X'Σ, I_d, Σ)` with
/// `Σ = (XX' + I_p/τ)^{-1}`. The factorization is computed once.
#[derive(Debug, Clone)]
pub struct BetaPosterior {
    /// `X'Σ`, `n × p`.
    gain: DMatrix<f64>,
    cov_factor: DMatrix<f64>,
}

impl BetaPosterior {
    pub fn new(x: &DMatrix<f64>, tau: f64) -> Result<Self> {
        let p = x.nrows();
        let precision = x * x.transpose() + DMatrix::identity(p, p) / tau;
        let chol = nalgebra::Cholesky::new(precision).ok_or(Error::NotPositiveDefinite)?;
        let cov = chol.inverse();
        let gain = x.transpose() * &cov;
        let cov_factor = cholesky_factor(&cov)?;
        Ok(BetaPosterior { gain, cov_factor })
    }

    /// Posterior mean `ζ'X'Σ` for latents stacked as an `n × d` matrix.
    pub fn mean(&self, zeta: &DMatrix<f64>) -> DMatrix<f64> {
        zeta.transpose() * &self.gain
    }

    /// Posterior standard deviation of every entry in column `k`.
    pub fn column_sd(&self, k: usize) -> f64 {
        self.cov_factor.row(k).norm()
    }

    pub fn sample<R: Rng + ?Sized>(&self, zeta: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
        sample_matrix_normal_factored(&self.mean(zeta), None, &self.cov_factor, rng)
    }
}

/// Draws `β` from its full conditional.
pub fn gibbs_update_beta<R: Rng + ?Sized>(posterior: &BetaPosterior, latents: &[Latent], rng: &mut R) -> DMatrix<f64> {
    posterior.sample(&stack_latents(latents), rng)
}

/// Latents as an `n × d` matrix.
pub fn stack_latents(latents: &[Latent]) -> DMatrix<f64> {
    let n = latents.len();
    let d = latents.first().map_or(0, |l| l.zeta.len());
    DMatrix::from_fn(n, d, |i, j| latents[i].zeta[j])
}

/// Per-observation latent state plus the round-robin block schedule, shared
/// by every model in this module.
pub(crate) struct LatentSweeper {
    pub obs: Vec<ObsState>,
    d: usize,
    block_size: usize,
    cursor: usize,
    settings: PolytopeSettings,
    check_identity: bool,
    adapt: bool,
    window: (u64, u64),
    pub violations: u64,
    pub checks: u64,
}

pub(crate) struct ObsState {
    latent: Latent,
    rng: StreamRng,
    accepted: u64,
    proposed: u64,
}

impl LatentSweeper {
    pub fn new(dataset_y: &[Vec<u8>], cs: &ConstraintSystem, config: &SamplerConfig) -> Result<Self> {
        let d = cs.dim();
        let obs = dataset_y
            .iter()
            .enumerate()
            .map(|(i, y)| {
                Ok(ObsState {
                    latent: init_observation(i, y, cs)?,
                    rng: SeededStream::new(config.seed, i as u64).rng(),
                    accepted: 0,
                    proposed: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentSweeper {
            obs,
            d,
            block_size: config.resolved_block_size(d),
            cursor: 0,
            settings: config.polytope_settings(),
            check_identity: config.check_identity,
            adapt: config.adapt_block_size,
            window: (0, 0),
            violations: 0,
            checks: 0,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    fn next_block(&mut self) -> Vec<usize> {
        let blocks = self.d.div_ceil(self.block_size);
        let b = self.cursor % blocks;
        self.cursor += 1;
        (b * self.block_size..((b + 1) * self.block_size).min(self.d)).collect()
    }

    /// Updates every latent once; `means` is `d × n` with column `i` the
    /// mean of observation `i`.
    pub fn sweep(&mut self, y: &[Vec<u8>], means: &DMatrix<f64>, cs: &ConstraintSystem) -> Result<()> {
        let block = self.next_block();
        let d = self.d;
        let settings = self.settings;
        let check = self.check_identity;
        let flat = means.as_slice();
        let (acc, viol) = self
            .obs
            .par_iter_mut()
            .enumerate()
            .map(|(i, o)| -> Result<(u64, u64)> {
                let mean = &flat[i * d..(i + 1) * d];
                let ok = gibbs_update_zeta(i, &mut o.latent, &y[i], mean, &block, cs, &settings, &mut o.rng)?;
                o.proposed += 1;
                o.accepted += ok as u64;
                let bad = check && solve_transform(&o.latent.zeta, cs).map_or(true, |r| r.y != y[i]);
                Ok((ok as u64, bad as u64))
            })
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
        if check {
            self.checks += self.obs.len() as u64;
            self.violations += viol;
        }
        self.window.0 += acc;
        self.window.1 += self.obs.len() as u64;
        Ok(())
    }

    /// Called once per iteration during burn-in.
    pub fn maybe_adapt(&mut self, iteration: usize) {
        if !self.adapt || iteration % ADAPT_WINDOW != 0 {
            return;
        }
        let (acc, tot) = std::mem::take(&mut self.window);
        if self.block_size > 1 && tot > 0 && (acc as f64) < COLLAPSE_RATE * tot as f64 {
            let next = self.block_size / 2;
            log::warn!(
                "latent acceptance {:.4} over the last {ADAPT_WINDOW} iterations; block size {} -> {next}",
                acc as f64 / tot as f64,
                self.block_size
            );
            self.block_size = next;
            self.cursor = 0;
        }
    }

    pub fn end_burnin(&mut self) {
        self.adapt = false;
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.obs.len();
        DMatrix::from_fn(n, self.d, |i, j| self.obs[i].latent.zeta[j])
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.obs.iter().map(|o| if o.proposed == 0 { 0.0 } else { o.accepted as f64 / o.proposed as f64 }).collect()
    }
}

pub(crate) fn metadata(config: &SamplerConfig, sweeper: &LatentSweeper, d: usize, start: Instant) -> ChainMetadata {
    ChainMetadata {
        seed: config.seed,
        iterations: config.iterations,
        burnin: config.burnin,
        thin: config.thin,
        block_size: config.resolved_block_size(d),
        acceptance_rates: sweeper.acceptance_rates(),
        wall_seconds: start.elapsed().as_secs_f64(),
        final_block_size: sweeper.block_size(),
        identity_violations: sweeper.violations,
        identity_checks: sweeper.checks,
    }
}

/// Runs the regression sampler with `β` initialized at zero; retains every
/// `thin`-th draw after burn-in.
pub fn run_chain(dataset: &Dataset, config: &SamplerConfig) -> Result<Chain> {
    config.validate()?;
    let start = Instant::now();
    let (d, p) = (dataset.d(), dataset.p());
    let cs = dataset.constraints();
    let posterior = BetaPosterior::new(dataset.covariates(), config.tau)?;
    let mut sweeper = LatentSweeper::new(dataset.responses(), cs, config)?;
    let mut beta_rng = SeededStream::new(config.seed, BETA_STREAM).rng();
    let mut beta = DMatrix::zeros(d, p);
    let mut chain = Chain::new(d, p, 0, metadata(config, &sweeper, d, start));

    for iter in 1..=config.iterations {
        let means = &beta * dataset.covariates();
        sweeper.sweep(dataset.responses(), &means, cs)?;
        if iter % 1000 == 0 {
            log::info!("iteration {iter}/{}", config.iterations);
        }
        beta = posterior.sample(&sweeper.stacked(), &mut beta_rng);
        if iter <= config.burnin {
            sweeper.maybe_adapt(iter);
            if iter == config.burnin {
                sweeper.end_burnin();
            }
        } else if (iter - config.burnin) % config.thin == 0 {
            chain.push(iter, &beta, &[]);
        }
    }
    chain.metadata = metadata(config, &sweeper, d, start);
    Ok(chain)
}

/// The intercept-only model `ζ_i ~ N(μ, I_d)`; the chain's `β` is the
/// `d × 1` mean vector.
pub fn run_intercept_chain(y: Vec<Vec<u8>>, cs: ConstraintSystem, config: &SamplerConfig) -> Result<Chain> {
    run_chain(&Dataset::intercept(y, cs)?, config)
}
