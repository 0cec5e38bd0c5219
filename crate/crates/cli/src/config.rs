//! Run configuration: one TOML file with `[sampler]`, `[simulate]` and
//! `[predict]` sections, overridden by command-line flags. The resolved
//! configuration is written next to every output.

use std::path::Path;

use combireg::mcmc::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run: RunRecord,
    pub sampler: SamplerConfig,
    pub simulate: SimulateConfig,
    pub predict: PredictConfig,
}

/// What was run, with which inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunRecord {
    pub command: String,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub n: usize,
    pub p: usize,
    /// True coefficients are `Uniform(-beta_scale, beta_scale)`.
    pub beta_scale: f64,
    pub seed: u64,
    /// Intercept-only data at this mean instead of a regression.
    pub intercept: Option<Vec<f64>>,
    /// `"duck"` for the duck-style pair-formation scenario.
    pub scenario: Option<String>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { n: 1000, p: 5, beta_scale: 1.0, seed: 0, intercept: None, scenario: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub mc_draws: usize,
    pub seed: u64,
    pub x: Option<Vec<f64>>,
    /// `start:end:step` time grid for curve output.
    pub grid: Option<String>,
    pub competition: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { mc_draws: 1000, seed: 0, x: None, grid: None, competition: false }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::usage(e.to_string()))?;
        std::fs::write(dir.join("resolved_config.toml"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig =
            toml::from_str("[sampler]\niterations = 50\nburnin = 5\n[predict]\nmc_draws = 7\n").unwrap();
        assert_eq!(cfg.sampler.iterations, 50);
        assert_eq!(cfg.sampler.tau, 10.0);
        assert_eq!(cfg.predict.mc_draws, 7);
        assert_eq!(cfg.simulate.n, 1000);
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
