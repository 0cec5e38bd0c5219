//! Prior-predictive Monte Carlo estimates of the marginal likelihood.
//!
//! For prior draws `β_s ~ Mat-N(0, I_d, τ I_p)` the likelihood
//! `Π_i P(y_i | β_s x_i)` is estimated by pushing `ζ ~ N(β_s x_i, I_d)`
//! through the transform and counting hits, once per distinct mean. The
//! estimate is the average over draws, computed in log space. It is only
//! practical for small models.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSystem;
use crate::distributions::SeededStream;
use crate::error::{Error, Result};
use crate::simulate::draw_response;

/// Estimates whose relative standard error exceeds this are rejected.
pub const MAX_RELATIVE_SE: f64 = 0.5;

/// Regression design and prior scale of one candidate model.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorModel {
    /// `p × n` covariates.
    pub x: DMatrix<f64>,
    pub tau: f64,
}

impl PriorModel {
    pub fn intercept(n: usize, tau: f64) -> Self {
        PriorModel { x: DMatrix::from_element(1, n, 1.0), tau }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalEstimate {
    pub log_ml: f64,
    /// Standard error of the estimate divided by the estimate.
    pub relative_se: f64,
    pub prior_draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    /// `m_1(y) / m_2(y)`.
    pub value: f64,
    pub log_value: f64,
    /// Delta-method standard error of `value`.
    pub se: f64,
}

fn log_likelihood_draw(
    model: &PriorModel,
    y: &[Vec<u8>],
    cs: &ConstraintSystem,
    mc_draws: usize,
    stream: SeededStream,
) -> Result<f64> {
    let (d, p) = (cs.dim(), model.x.nrows());
    let mut rng = stream.rng();
    let scale = model.tau.sqrt();
    let beta = DMatrix::from_fn(d, p, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let means = &beta * &model.x;
    let mut laws: HashMap<Vec<u64>, HashMap<Vec<u8>, u64>> = HashMap::new();
    let mut total = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let mean: Vec<f64> = means.column(i).iter().copied().collect();
        let key: Vec<u64> = mean.iter().map(|v| v.to_bits()).collect();
        if !laws.contains_key(&key) {
            let mut counts = HashMap::new();
            for _ in 0..mc_draws {
                *counts.entry(draw_response(&mean, cs, &mut rng)?).or_insert(0) += 1;
            }
            laws.insert(key.clone(), counts);
        }
        let hits = laws[&key].get(yi).copied().unwrap_or(0);
        if hits == 0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += (hits as f64 / mc_draws as f64).ln();
    }
    Ok(total)
}

/// Prior-predictive estimate of `log m(y)`; prior draw `s` uses stream `s`.
pub fn log_marginal_likelihood(
    model: &PriorModel,
    y: &[Vec<u8>],
    cs: &ConstraintSystem,
    prior_draws: usize,
    mc_draws: usize,
    seed: u64,
) -> Result<MarginalEstimate> {
    if model.x.ncols() != y.len() {
        return Err(Error::DimensionMismatch(format!("design has {} columns for {} rows", model.x.ncols(), y.len())));
    }
    if prior_draws < 2 || mc_draws == 0 || !(model.tau > 0.0) {
        return Err(Error::InvalidConfig("need prior_draws >= 2, mc_draws >= 1 and tau > 0".into()));
    }
    if let Some(i) = y.iter().position(|r| !cs.is_feasible(r)) {
        return Err(Error::InfeasibleRow(i));
    }
    let logs = (0..prior_draws)
        .into_par_iter()
        .map(|s| log_likelihood_draw(model, y, cs, mc_draws, SeededStream::new(seed, s as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::EstimateUnstable(f64::INFINITY));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s = prior_draws as f64;
    let mean = w.iter().sum::<f64>() / s;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0);
    let relative_se = (var / s).sqrt() / mean;
    if relative_se > MAX_RELATIVE_SE {
        return Err(Error::EstimateUnstable(relative_se));
    }
    Ok(MarginalEstimate { log_ml: max + mean.ln(), relative_se, prior_draws })
}

/// Bayes factor of model 1 over model 2. Both estimates use the same
/// seed, so shared structure cancels (common random numbers).
pub fn bayes_factor(
    model_1: &PriorModel,
    model_2: &PriorModel,
    y: &[Vec<u8>],
    cs: &ConstraintSystem,
    prior_draws: usize,
    mc_draws: usize,
    seed: u64,
) -> Result<BayesFactor> {
    let m1 = log_marginal_likelihood(model_1, y, cs, prior_draws, mc_draws, seed)?;
    let m2 = log_marginal_likelihood(model_2, y, cs, prior_draws, mc_draws, seed)?;
    Ok(from_estimates(&m1, &m2))
}

/// Combines two independent or paired estimates.
pub fn from_estimates(m1: &MarginalEstimate, m2: &MarginalEstimate) -> BayesFactor {
    let log_value = m1.log_ml - m2.log_ml;
    let value = log_value.exp();
    BayesFactor { value, log_value, se: value * m1.relative_se.hypot(m2.relative_se) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_cardinality;

    #[test]
    fn identical_models_give_one() {
        let cs = build_cardinality(2, 1).unwrap();
        let y = vec![vec![1, 0], vec![0, 1], vec![0, 0], vec![0, 1], vec![1, 0]];
        let m = PriorModel::intercept(5, 1.0);
        let bf = bayes_factor(&m, &m, &y, &cs, 300, 200, 7).unwrap();
        assert_eq!(bf.value, 1.0);
        assert!(bf.se > 0.0);
    }

    #[test]
    fn bad_inputs() {
        let cs = build_cardinality(2, 1).unwrap();
        let m = PriorModel::intercept(2, 1.0);
        assert!(log_marginal_likelihood(&m, &[vec![1, 0]], &cs, 10, 10, 1).is_err());
        assert_eq!(
            log_marginal_likelihood(&m, &[vec![1, 0], vec![1, 1]], &cs, 10, 10, 1),
            Err(Error::InfeasibleRow(1))
        );
    }
}
