//! Random variates and the standard normal CDF.
//!
//! Every sampler draws from an explicit generator. [`SeededStream`] pairs a
//! run seed with a stream id (observation index, chain component, ...) and
//! produces an independent ChaCha stream, so parallel updates stay
//! reproducible regardless of scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Generator handed out by [`SeededStream`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        SeededStream { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `Φ(x)` through the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ^{-1}(p)` for `p ∈ (0, 1)`, polished with one Newton step.
pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let dens = std_normal_pdf(x);
    if x.is_finite() && dens > 0.0 {
        x - (std_normal_cdf(x) - p) / dens
    } else {
        x
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Which side of the cut point a one-sided truncated normal lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Support `(c, ∞)`.
    Above(f64),
    /// Support `(-∞, c)`.
    Below(f64),
}

/// Draws from `N(mean, 1)` restricted to one side of a cut point.
///
/// Uses the inverse CDF when the standardized cut is within 4 of zero and an
/// exponential-proposal rejection sampler in the far tail. The result is
/// strictly inside the support.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, side: Truncation, rng: &mut R) -> f64 {
    match side {
        Truncation::Above(c) => loop {
            let x = mean + standard_above(c - mean, rng);
            if x > c {
                return x;
            }
        },
        Truncation::Below(c) => loop {
            let x = mean - standard_above(mean - c, rng);
            if x < c {
                return x;
            }
        },
    }
}

/// `Z ~ N(0,1)` conditioned on `Z > alpha`.
fn standard_above<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha > 4.0 {
        let lambda = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = alpha + e / lambda;
            let u: f64 = Open01.sample(rng);
            if u <= (-0.5 * (z - lambda) * (z - lambda)).exp() {
                return z;
            }
        }
    } else if alpha < -4.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > alpha {
                return z;
            }
        }
    } else {
        let upper_mass = std_normal_cdf(-alpha);
        loop {
            let u: f64 = Open01.sample(rng);
            let z = -std_normal_quantile(u * upper_mass);
            if z > alpha {
                return z;
            }
        }
    }
}

/// Inverse-CDF draw from density `∝ rate·exp(-rate·t)` on `(a, b)`; `b` may
/// be infinite. The interval may start below zero (shifted exponential).
pub fn sample_truncated_exponential<R: Rng + ?Sized>(rate: f64, a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a < b) || !a.is_finite() || !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidInterval { a, b });
    }
    let width = b - a;
    let mass = if width.is_finite() { -(-rate * width).exp_m1() } else { 1.0 };
    for _ in 0..64 {
        let u: f64 = Open01.sample(rng);
        let t = a - (-u * mass).ln_1p() / rate;
        if t > a && t < b {
            return Ok(t);
        }
    }
    // interval narrower than float resolution
    Ok(a + 0.5 * width)
}

/// Draws `M + L_row Z L_colᵀ` where `L_row`, `L_col` are Cholesky factors.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    row_cov: &DMatrix<f64>,
    col_cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let row_factor = cholesky_factor(row_cov)?;
    let col_factor = cholesky_factor(col_cov)?;
    Ok(sample_matrix_normal_factored(mean, Some(&row_factor), &col_factor, rng))
}

/// Lower Cholesky factor, or `NotPositiveDefinite`.
pub fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::NotPositiveDefinite);
    }
    nalgebra::Cholesky::new(cov.clone()).map(|c| c.l()).ok_or(Error::NotPositiveDefinite)
}

/// As [`sample_matrix_normal`] with precomputed factors; `None` for the row
/// factor means identity row covariance.
pub fn sample_matrix_normal_factored<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    row_factor: Option<&DMatrix<f64>>,
    col_factor: &DMatrix<f64>,
    rng: &mut R,
) -> DMatrix<f64> {
    let (q, r) = mean.shape();
    let z = DMatrix::from_fn(q, r, |_, _| StandardNormal.sample(rng));
    let left = match row_factor {
        Some(l) => l * z,
        None => z,
    };
    mean + left * col_factor.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(id: u64) -> StreamRng {
        SeededStream::new(42, id).rng()
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        let tail = std_normal_cdf(-8.0);
        assert!(tail > 0.0 && tail < 1e-14);
        // Φ(-8) = 6.220960574271785e-16
        assert!((tail / 6.220960574271785e-16 - 1.0).abs() < 1e-9);
        assert!((std_normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = -10.0 + 20.0 * i as f64 / 9_999.0;
            let p = std_normal_cdf(x);
            assert!((p + std_normal_cdf(-x) - 1.0).abs() < 1e-14);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.01, 0.3, 0.5, 0.975, 0.999] {
            assert!((std_normal_cdf(std_normal_quantile(p)) / p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn half_normal_mean() {
        let mut r = rng(1);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_normal(0.0, Truncation::Below(0.0), &mut r);
            assert!(x < 0.0);
            sum += x;
        }
        let mean = sum / n as f64;
        assert!((mean + (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.008, "{mean}");
    }

    #[test]
    fn inactive_truncation() {
        let mut r = rng(2);
        let n = 100_000;
        let mean: f64 =
            (0..n).map(|_| sample_truncated_normal(5.0, Truncation::Above(0.0), &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 5.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn far_tail() {
        let mut r = rng(3);
        let n = 50_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_truncated_normal(0.0, Truncation::Above(6.0), &mut r);
            assert!(x > 6.0);
            sum += x;
        }
        // E[Z | Z > 6] = φ(6)/Φ(-6)
        let exact = std_normal_pdf(6.0) / std_normal_cdf(-6.0);
        let sd = 1.0 / 6.0; // the conditional sd is below 1/alpha
        assert!((sum / n as f64 - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{}", sum / n as f64);
    }

    #[test]
    fn truncated_exponential_mean() {
        let mut r = rng(4);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_truncated_exponential(2.0, 0.0, 1.0, &mut r).unwrap()).collect();
        // mean of Exp(2) on (0,1): 1/2 - e^{-2}/(1 - e^{-2})
        let e2 = (-2.0f64).exp();
        let exact = 0.5 - e2 / (1.0 - e2);
        let second = draws.iter().map(|x| (x - exact).powi(2)).sum::<f64>() / n as f64;
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - exact).abs() < 3.0 * (second / n as f64).sqrt());
        assert!(draws.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn truncated_exponential_edges() {
        let mut r = rng(5);
        let eps = 1e-9;
        for _ in 0..1000 {
            let t = sample_truncated_exponential(1.0, 3.0, 3.0 + eps, &mut r).unwrap();
            assert!(t > 3.0 && t < 3.0 + eps);
        }
        let shifted = sample_truncated_exponential(0.5, -2.0, -1.0, &mut r).unwrap();
        assert!(shifted > -2.0 && shifted < -1.0);
        assert!(sample_truncated_exponential(1.0, 1.0, 1.0, &mut r).is_err());
        assert!(sample_truncated_exponential(0.0, 0.0, 1.0, &mut r).is_err());
    }

    #[test]
    fn matrix_normal_moments() {
        let mut r = rng(6);
        let mean = DMatrix::zeros(2, 2);
        let eye = DMatrix::identity(2, 2);
        let col = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        let n = 10_000;
        let mut s = [[0.0; 4]; 4];
        let mut col0 = 0.0;
        for _ in 0..n {
            let z = sample_matrix_normal(&mean, &eye, &eye, &mut r).unwrap();
            let v = [z[(0, 0)], z[(0, 1)], z[(1, 0)], z[(1, 1)]];
            for a in 0..4 {
                for b in 0..4 {
                    s[a][b] += v[a] * v[b] / n as f64;
                }
            }
            let w = sample_matrix_normal(&mean, &eye, &col, &mut r).unwrap();
            col0 += (w[(0, 0)].powi(2) + w[(1, 0)].powi(2)) / (2 * n) as f64;
        }
        for a in 0..4 {
            for b in 0..4 {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((s[a][b] - target).abs() < 0.05, "{a}{b}: {}", s[a][b]);
            }
        }
        assert!((col0 - 4.0).abs() < 0.2, "{col0}");
    }

    #[test]
    fn singular_covariance_rejected() {
        let mut r = rng(7);
        let mean = DMatrix::zeros(1, 2);
        let eye = DMatrix::identity(1, 1);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(sample_matrix_normal(&mean, &eye, &singular, &mut r).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<u64> = (0..5).map(|_| SeededStream::new(9, 1).rng().random()).collect();
        let mut r1 = SeededStream::new(9, 1).rng();
        let mut r2 = SeededStream::new(9, 1).rng();
        let mut r3 = SeededStream::new(9, 2).rng();
        let x1: Vec<u64> = (0..5).map(|_| r1.random()).collect();
        let x2: Vec<u64> = (0..5).map(|_| r2.random()).collect();
        let x3: Vec<u64> = (0..5).map(|_| r3.random()).collect();
        assert_eq!(x1, x2);
        assert_ne!(x1, x3);
        assert_eq!(a[0], x1[0]);
    }
}
