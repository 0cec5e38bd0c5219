use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degree of every basis built here (cubic).
pub const SPLINE_DEGREE: usize = 3;

/// Clamped B-spline basis with uniform interior knots on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub lo: f64,
    pub hi: f64,
    pub degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// `num_basis` functions of degree 3; needs `num_basis ≥ 4`.
    pub fn new(lo: f64, hi: f64, num_basis: usize) -> Result<Self> {
        let k = SPLINE_DEGREE;
        if num_basis < k + 1 {
            return Err(Error::InvalidConfig(format!("need at least {} basis functions, got {num_basis}", k + 1)));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InsufficientPoints(format!("range [{lo}, {hi}] is empty")));
        }
        let interior = num_basis - k - 1;
        let mut knots = vec![lo; k + 1];
        for i in 1..=interior {
            knots.push(lo + (hi - lo) * i as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(hi, k + 1));
        Ok(BSplineBasis { lo, hi, degree: k, knots })
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// All basis values at `t` (clamped into the range); they sum to one.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let k = self.degree;
        let t = t.clamp(self.lo, self.hi);
        let nb = self.num_basis();
        // knot span with knots[span] <= t < knots[span + 1], the last span
        // taking the right endpoint
        let mut span = k;
        while span < nb - 1 && t >= self.knots[span + 1] {
            span += 1;
        }
        // de Boor's triangular recursion for the k+1 nonzero functions
        let mut n = vec![0.0; k + 1];
        let mut left = vec![0.0; k + 1];
        let mut right = vec![0.0; k + 1];
        n[0] = 1.0;
        for j in 1..=k {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; nb];
        for (r, v) in n.into_iter().enumerate() {
            out[span - k + r] = v;
        }
        out
    }
}

/// Design matrix of a cubic clamped B-spline basis with `num_basis` columns
/// spanning the range of `time_points`.
pub fn bspline_design(time_points: &[f64], num_basis: usize) -> Result<DMatrix<f64>> {
    let lo = time_points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = time_points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if time_points.len() < 2 || !(lo < hi) {
        return Err(Error::InsufficientPoints("need at least 2 distinct time points".into()));
    }
    let basis = BSplineBasis::new(lo, hi, num_basis)?;
    let rows: Vec<Vec<f64>> = time_points.iter().map(|&t| basis.evaluate(t)).collect();
    Ok(DMatrix::from_fn(rows.len(), num_basis, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weeks() -> Vec<f64> {
        (1..=20).map(|w| w as f64).collect()
    }

    #[test]
    fn partition_of_unity() {
        let b = bspline_design(&weeks(), 5).unwrap();
        assert_eq!(b.shape(), (20, 5));
        for row in b.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn left_endpoint_first_basis() {
        let b = bspline_design(&weeks(), 5).unwrap();
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(19, 4)], 1.0);
    }

    #[test]
    fn reproduces_linear() {
        let t = weeks();
        let b = bspline_design(&t, 6).unwrap();
        let target = nalgebra::DVector::from_iterator(t.len(), t.iter().map(|x| 3.0 - 0.7 * x));
        let coef = b.clone().svd(true, true).solve(&target, 1e-14).unwrap();
        let resid = (&b * coef - &target).norm();
        assert!(resid < 1e-10, "{resid}");
    }

    #[test]
    fn errors() {
        assert!(matches!(bspline_design(&[1.0, 1.0], 5), Err(Error::InsufficientPoints(_))));
        assert!(bspline_design(&weeks(), 3).is_err());
    }
}
