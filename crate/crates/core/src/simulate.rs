//! Synthetic data: covariates, coefficient draws and responses generated
//! through the transform.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::constraints::ConstraintSystem;
use crate::distributions::SeededStream;
use crate::error::{Error, Result};
use crate::mcmc::Dataset;
use crate::transform::solve_transform;

const COVARIATE_STREAM: u64 = 1 << 33;
const TRUTH_STREAM: u64 = (1 << 33) + 1;
const LATENT_STREAM: u64 = (1 << 33) + 2;

/// `p × n` covariates with iid standard normal entries.
pub fn draw_covariates<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(rng))
}

/// `d × p` coefficients with iid `Uniform(-scale, scale)` entries.
pub fn draw_beta_truth<R: Rng + ?Sized>(d: usize, p: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let unif = Uniform::new(-scale, scale).expect("positive scale");
    DMatrix::from_fn(d, p, |_, _| unif.sample(rng))
}

/// `y = T(ζ)` for `ζ ~ N(mean, I_d)`; redraws on the probability-zero event
/// of a tied optimum.
pub fn draw_response<R: Rng + ?Sized>(mean: &[f64], cs: &ConstraintSystem, rng: &mut R) -> Result<Vec<u8>> {
    for _ in 0..100 {
        let zeta: Vec<f64> = mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
        match solve_transform(&zeta, cs) {
            Ok(r) => return Ok(r.y),
            Err(Error::DegenerateInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateInput("repeated ties while simulating".into()))
}

/// Responses for the columns of `mean` (`d × n`).
pub fn simulate_responses(mean: &DMatrix<f64>, cs: &ConstraintSystem, seed: u64) -> Result<Vec<Vec<u8>>> {
    let mut rng = SeededStream::new(seed, LATENT_STREAM).rng();
    (0..mean.ncols()).map(|i| draw_response(mean.column(i).as_slice(), cs, &mut rng)).collect()
}

/// A simulated regression data set and the coefficients that generated it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: Dataset,
    pub beta: DMatrix<f64>,
}

/// Draws `X`, uses `beta` when given (else `Uniform(-scale, scale)`
/// entries), and generates responses. Deterministic in `seed`.
pub fn simulate_regression(
    cs: &ConstraintSystem,
    n: usize,
    p: usize,
    beta: Option<DMatrix<f64>>,
    scale: f64,
    seed: u64,
) -> Result<Simulation> {
    let d = cs.dim();
    let beta = match beta {
        Some(b) if b.shape() != (d, p) => {
            return Err(Error::ShapeMismatch(format!("beta is {:?}, expected {:?}", b.shape(), (d, p))))
        }
        Some(b) => b,
        None => draw_beta_truth(d, p, scale, &mut SeededStream::new(seed, TRUTH_STREAM).rng()),
    };
    let x = draw_covariates(p, n, &mut SeededStream::new(seed, COVARIATE_STREAM).rng());
    let y = simulate_responses(&(&beta * &x), cs, seed)?;
    Ok(Simulation { dataset: Dataset::new(y, x, cs.clone())?, beta })
}

/// Intercept-only responses at a fixed mean.
pub fn simulate_intercept(cs: &ConstraintSystem, mu: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    let mean = DMatrix::from_fn(cs.dim(), n, |j, _| mu[j]);
    simulate_responses(&mean, cs, seed)
}
