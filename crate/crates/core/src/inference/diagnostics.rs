use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::Chain;

/// Sample autocorrelations at lags `0..=max_lag` with the biased
/// (`1/n`) normalization.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::SeriesTooShort { len: n, max_lag });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = centred.iter().map(|x| x * x).sum();
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::ConstantSeries);
    }
    Ok((0..=max_lag)
        .map(|k| centred[..n - k].iter().zip(&centred[k..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

/// Root mean squared entrywise difference.
pub fn rmse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", estimate.shape(), truth.shape())));
    }
    if estimate.is_empty() {
        return Ok(0.0);
    }
    Ok(((estimate - truth).norm_squared() / estimate.len() as f64).sqrt())
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

pub fn summarize(name: &str, values: &[f64]) -> Result<ParamSummary> {
    if values.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd: var.sqrt(),
        q025: quantile_sorted(&sorted, 0.025),
        q50: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

/// Mean, standard deviation and 2.5/50/97.5% quantiles of every parameter.
pub fn posterior_summary(chain: &Chain) -> Result<Vec<ParamSummary>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    chain.param_names().iter().enumerate().map(|(k, name)| summarize(name, &chain.series(k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SeededStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn acf_white_noise_and_ar1() {
        let mut rng = SeededStream::new(1, 0).rng();
        let noise: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let r = acf(&noise, 25).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r[1..].iter().all(|v| v.abs() < 0.05));

        let mut x = 0.0;
        let ar: Vec<f64> = (0..100_000)
            .map(|_| {
                x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        assert!((acf(&ar, 1).unwrap()[1] - 0.9).abs() < 0.02);
    }

    #[test]
    fn acf_errors() {
        assert!(matches!(acf(&[1.0, 2.0], 2), Err(Error::SeriesTooShort { .. })));
        assert!(matches!(acf(&[3.0; 10], 2), Err(Error::ConstantSeries)));
    }

    #[test]
    fn rmse_examples() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        assert!((rmse(&t.add_scalar(0.1), &t).unwrap() - 0.1).abs() < 1e-12);
        assert!(rmse(&t, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize("c", &[2.5; 7]).unwrap();
        assert_eq!((s.mean, s.sd, s.q025, s.q50, s.q975), (2.5, 0.0, 2.5, 2.5, 2.5));
        let mut rng = SeededStream::new(2, 0).rng();
        let v: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!((summarize("z", &v).unwrap().q975 - 1.96).abs() < 0.03);
        assert!(summarize("e", &[]).is_err());
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }
}
