//! Posterior prediction by Monte Carlo through the transform, event
//! queries, the unconstrained probit baseline, diagnostics, B-spline
//! designs and marginal likelihoods.

mod bspline;
mod diagnostics;
mod marginal;
mod query;

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bspline::{bspline_design, BSplineBasis, SPLINE_DEGREE};
pub use diagnostics::{acf, posterior_summary, quantile_sorted, rmse, summarize, ParamSummary};
pub use marginal::{
    bayes_factor, from_estimates, log_marginal_likelihood, BayesFactor, MarginalEstimate, PriorModel, MAX_RELATIVE_SE,
};
pub use query::{Comparison, EventQuery, Predicate};

use crate::constraints::{enumerate_feasible, ConstraintSystem, MAX_ENUMERATION_DIM};
use crate::distributions::SeededStream;
use crate::error::{Error, Result};
use crate::mcmc::Chain;
use crate::simulate::draw_response;

/// Fewest conditioning hits accepted by [`event_probability`].
pub const MIN_CONDITIONING_HITS: u64 = 100;

/// Outcome probabilities; outcomes absent from the list have probability
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLaw {
    pub outcomes: Vec<Vec<u8>>,
    pub probabilities: Vec<f64>,
}

impl OutcomeLaw {
    pub fn probability_of(&self, y: &[u8]) -> f64 {
        self.outcomes.iter().position(|o| o == y).map_or(0.0, |k| self.probabilities[k])
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Total variation distance, treating missing outcomes as zero.
    pub fn total_variation(&self, other: &OutcomeLaw) -> f64 {
        let mut keys: Vec<&Vec<u8>> = self.outcomes.iter().chain(&other.outcomes).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys.iter().map(|y| (self.probability_of(y) - other.probability_of(y)).abs()).sum::<f64>()
    }
}

/// Posterior predictive law with pointwise 95% bands across draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedLaw {
    pub outcomes: Vec<Vec<u8>>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandedLaw {
    pub fn mean_law(&self) -> OutcomeLaw {
        OutcomeLaw { outcomes: self.outcomes.clone(), probabilities: self.mean.clone() }
    }

    /// CSV with columns `outcome_bits,prob_mean,prob_lo,prob_hi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "outcome_bits,prob_mean,prob_lo,prob_hi")?;
        for (k, y) in self.outcomes.iter().enumerate() {
            let bits: String = y.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            writeln!(out, "{bits},{},{},{}", self.mean[k], self.lower[k], self.upper[k])?;
        }
        Ok(())
    }
}

/// Pointwise mean and 2.5/97.5% quantiles of per-draw values.
pub fn band(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (mean, quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975))
}

fn feasible_index(cs: &ConstraintSystem) -> Result<(Vec<Vec<u8>>, HashMap<Vec<u8>, usize>)> {
    if cs.dim() > MAX_ENUMERATION_DIM {
        return Err(Error::SizeLimitExceeded(format!(
            "full outcome laws need d <= {MAX_ENUMERATION_DIM}; use an event query"
        )));
    }
    let outcomes = enumerate_feasible(cs)?;
    let index = outcomes.iter().enumerate().map(|(k, y)| (y.clone(), k)).collect();
    Ok((outcomes, index))
}

fn law_counts(
    mean: &[f64],
    cs: &ConstraintSystem,
    index: &HashMap<Vec<u8>, usize>,
    mc_draws: usize,
    stream: SeededStream,
) -> Result<Vec<f64>> {
    let mut rng = stream.rng();
    let mut counts = vec![0u64; index.len()];
    for _ in 0..mc_draws {
        let y = draw_response(mean, cs, &mut rng)?;
        counts[index[&y]] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / mc_draws as f64).collect())
}

/// Monte Carlo law of `T(ζ)` for `ζ ~ N(mean, I_d)`.
pub fn outcome_law_at_mean(mean: &[f64], cs: &ConstraintSystem, mc_draws: usize, seed: u64) -> Result<OutcomeLaw> {
    if mean.len() != cs.dim() || mc_draws == 0 {
        return Err(Error::DimensionMismatch("mean must have length d and mc_draws must be positive".into()));
    }
    let (outcomes, index) = feasible_index(cs)?;
    let probabilities = law_counts(mean, cs, &index, mc_draws, SeededStream::new(seed, 0))?;
    Ok(OutcomeLaw { outcomes, probabilities })
}

/// Predictive law over a set of posterior means (one per retained draw);
/// draw `s` uses stream `s`.
pub fn outcome_law_bands(means: &[Vec<f64>], cs: &ConstraintSystem, mc_draws: usize, seed: u64) -> Result<BandedLaw> {
    if means.is_empty() {
        return Err(Error::EmptyChain);
    }
    if mc_draws == 0 || means.iter().any(|m| m.len() != cs.dim()) {
        return Err(Error::DimensionMismatch("means must have length d and mc_draws must be positive".into()));
    }
    let (outcomes, index) = feasible_index(cs)?;
    let per_draw = means
        .par_iter()
        .enumerate()
        .map(|(s, m)| law_counts(m, cs, &index, mc_draws, SeededStream::new(seed, s as u64)))
        .collect::<Result<Vec<_>>>()?;
    let (mut mean, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..outcomes.len() {
        let vals: Vec<f64> = per_draw.iter().map(|p| p[k]).collect();
        let (m, lo, hi) = band(&vals);
        mean.push(m);
        lower.push(lo);
        upper.push(hi);
    }
    Ok(BandedLaw { outcomes, mean, lower, upper })
}

/// `β_s x_new` for every retained draw.
pub fn chain_means(chain: &Chain, x_new: &[f64], cs: &ConstraintSystem) -> Result<Vec<Vec<f64>>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if chain.beta_rows != cs.dim() || chain.beta_cols != x_new.len() {
        return Err(Error::DimensionMismatch(format!(
            "chain beta is {}x{}, constraints have d = {}, x_new has length {}",
            chain.beta_rows,
            chain.beta_cols,
            cs.dim(),
            x_new.len()
        )));
    }
    let x = DVector::from_column_slice(x_new);
    Ok((0..chain.len()).map(|s| (chain.beta(s) * &x).iter().copied().collect()).collect())
}

/// Posterior predictive law at covariates `x_new`, with pointwise bands
/// across retained draws.
pub fn predict_outcome_law(
    chain: &Chain,
    x_new: &[f64],
    cs: &ConstraintSystem,
    mc_draws: usize,
    seed: u64,
) -> Result<BandedLaw> {
    outcome_law_bands(&chain_means(chain, x_new, cs)?, cs, mc_draws, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// Draws satisfying the conditioning predicate, over all posterior draws.
    pub conditioning_hits: u64,
    /// Posterior draws with at least one conditioning hit.
    pub draws_used: usize,
}

/// `P(event | given)` per posterior mean, by the ratio of Monte Carlo tallies.
pub fn event_probability_at_means(
    means: &[Vec<f64>],
    cs: &ConstraintSystem,
    query: &EventQuery,
    mc_draws: usize,
    seed: u64,
) -> Result<EventEstimate> {
    let mut out = event_probabilities_at_means(means, cs, std::slice::from_ref(query), mc_draws, seed)?;
    Ok(out.remove(0))
}

/// Several queries evaluated on the same Monte Carlo draws.
pub fn event_probabilities_at_means(
    means: &[Vec<f64>],
    cs: &ConstraintSystem,
    queries: &[EventQuery],
    mc_draws: usize,
    seed: u64,
) -> Result<Vec<EventEstimate>> {
    if means.is_empty() {
        return Err(Error::EmptyChain);
    }
    for q in queries {
        q.validate(cs.dim())?;
    }
    if mc_draws == 0 || means.iter().any(|m| m.len() != cs.dim()) {
        return Err(Error::DimensionMismatch("means must have length d and mc_draws must be positive".into()));
    }
    // tallies[s][q] = (event and given, given)
    let tallies = means
        .par_iter()
        .enumerate()
        .map(|(s, m)| -> Result<Vec<(u64, u64)>> {
            let mut rng = SeededStream::new(seed, s as u64).rng();
            let mut t = vec![(0u64, 0u64); queries.len()];
            for _ in 0..mc_draws {
                let y = draw_response(m, cs, &mut rng)?;
                for (q, slot) in queries.iter().zip(t.iter_mut()) {
                    if q.conditioning_holds(&y) {
                        slot.1 += 1;
                        slot.0 += q.event.holds(&y) as u64;
                    }
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    queries
        .iter()
        .enumerate()
        .map(|(k, query)| {
            let total: u64 = tallies.iter().map(|t| t[k].1).sum();
            if query.given.is_some() && total < MIN_CONDITIONING_HITS {
                return Err(Error::ConditioningTooRare { hits: total, required: MIN_CONDITIONING_HITS });
            }
            let ratios: Vec<f64> =
                tallies.iter().filter(|t| t[k].1 > 0).map(|t| t[k].0 as f64 / t[k].1 as f64).collect();
            if ratios.is_empty() {
                return Err(Error::ConditioningTooRare { hits: 0, required: MIN_CONDITIONING_HITS });
            }
            let (mean, lower, upper) = band(&ratios);
            Ok(EventEstimate { mean, lower, upper, conditioning_hits: total, draws_used: ratios.len() })
        })
        .collect()
}

/// Posterior probability of an event at covariates `x_new`.
pub fn event_probability(
    chain: &Chain,
    x_new: &[f64],
    cs: &ConstraintSystem,
    query: &EventQuery,
    mc_draws: usize,
    seed: u64,
) -> Result<EventEstimate> {
    event_probability_at_means(&chain_means(chain, x_new, cs)?, cs, query, mc_draws, seed)
}

/// Independent per-coordinate probit fit that ignores the constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitFit {
    /// `q̂_j = n_{j1} / n`.
    pub q: Vec<f64>,
}

impl ProbitFit {
    /// Product-form probability of `y`, feasible or not.
    pub fn probability(&self, y: &[u8]) -> f64 {
        self.q.iter().zip(y).map(|(&q, &b)| if b == 1 { q } else { 1.0 - q }).product()
    }

    /// The product law over all of `{0,1}^d`.
    pub fn product_law(&self) -> Result<OutcomeLaw> {
        let d = self.q.len();
        if d > MAX_ENUMERATION_DIM {
            return Err(Error::SizeLimitExceeded(format!("product law needs d <= {MAX_ENUMERATION_DIM}")));
        }
        let outcomes: Vec<Vec<u8>> =
            (0..1u32 << d).map(|m| (0..d).map(|j| ((m >> (d - 1 - j)) & 1) as u8).collect()).collect();
        let probabilities = outcomes.iter().map(|y| self.probability(y)).collect();
        Ok(OutcomeLaw { outcomes, probabilities })
    }
}

pub fn fit_unconstrained_probit(y: &[Vec<u8>]) -> Result<ProbitFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptyChain);
    }
    let d = y[0].len();
    if y.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch("rows differ in length".into()));
    }
    let q = (0..d).map(|j| y.iter().filter(|r| r[j] == 1).count() as f64 / n as f64).collect();
    Ok(ProbitFit { q })
}
