use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run record written next to a chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainMetadata {
    pub seed: u64,
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub block_size: usize,
    /// Per-observation acceptance rate of the latent moves.
    pub acceptance_rates: Vec<f64>,
    pub wall_seconds: f64,
    /// Block size after any burn-in reduction.
    #[serde(default)]
    pub final_block_size: usize,
    /// Updates after which `T(ζ_i) ≠ y_i`; only counted when identity
    /// checking is on.
    #[serde(default)]
    pub identity_violations: u64,
    #[serde(default)]
    pub identity_checks: u64,
}

/// Retained draws. Each row holds the row-major flattening of `β`
/// (`beta_rows × beta_cols`) followed by any `α` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub beta_rows: usize,
    pub beta_cols: usize,
    pub num_alpha: usize,
    pub iterations: Vec<usize>,
    pub draws: Vec<Vec<f64>>,
    pub metadata: ChainMetadata,
}

impl Chain {
    pub fn new(beta_rows: usize, beta_cols: usize, num_alpha: usize, metadata: ChainMetadata) -> Self {
        Chain { beta_rows, beta_cols, num_alpha, iterations: Vec::new(), draws: Vec::new(), metadata }
    }

    pub fn push(&mut self, iteration: usize, beta: &DMatrix<f64>, alpha: &[f64]) {
        let mut row = Vec::with_capacity(beta.len() + alpha.len());
        for r in 0..beta.nrows() {
            for c in 0..beta.ncols() {
                row.push(beta[(r, c)]);
            }
        }
        row.extend_from_slice(alpha);
        self.iterations.push(iteration);
        self.draws.push(row);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.beta_rows * self.beta_cols + self.num_alpha
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_params());
        for r in 1..=self.beta_rows {
            for c in 1..=self.beta_cols {
                names.push(format!("beta_{r}_{c}"));
            }
        }
        names.extend((1..=self.num_alpha).map(|m| format!("alpha_{m}")));
        names
    }

    /// Trace of one parameter.
    pub fn series(&self, param: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[param]).collect()
    }

    pub fn beta(&self, draw: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.beta_rows, self.beta_cols, &self.draws[draw][..self.beta_rows * self.beta_cols])
    }

    pub fn alpha(&self, draw: usize) -> &[f64] {
        &self.draws[draw][self.beta_rows * self.beta_cols..]
    }

    pub fn posterior_mean_beta(&self) -> Result<DMatrix<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyChain);
        }
        let mut acc = DMatrix::zeros(self.beta_rows, self.beta_cols);
        for i in 0..self.len() {
            acc += self.beta(i);
        }
        Ok(acc / self.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,{}", self.param_names().join(","))?;
        for (it, row) in self.iterations.iter().zip(&self.draws) {
            write!(out, "{it}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parses a chain CSV; the shape is recovered from the header names.
    pub fn read_csv<R: BufRead>(input: R, metadata: ChainMetadata) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty chain file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let names: Vec<&str> = header.trim().split(',').collect();
        if names.first() != Some(&"iter") {
            return Err(Error::Parse("chain header must start with iter".into()));
        }
        let (mut rows, mut cols, mut num_alpha) = (0, 0, 0);
        for name in &names[1..] {
            let parts: Vec<&str> = name.split('_').collect();
            match parts.as_slice() {
                ["beta", r, c] => {
                    let r: usize = r.parse().map_err(|_| Error::Parse(format!("bad column {name}")))?;
                    let c: usize = c.parse().map_err(|_| Error::Parse(format!("bad column {name}")))?;
                    rows = rows.max(r);
                    cols = cols.max(c);
                }
                ["alpha", _] => num_alpha += 1,
                _ => return Err(Error::Parse(format!("unknown chain column {name}"))),
            }
        }
        let mut chain = Chain::new(rows, cols, num_alpha, metadata);
        if chain.num_params() != names.len() - 1 {
            return Err(Error::Parse("chain header is not a full beta grid".into()));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse(format!("row {} has {} fields", lineno + 2, fields.len())));
            }
            let it = fields[0].parse().map_err(|_| Error::Parse(format!("bad iteration on row {}", lineno + 2)))?;
            let vals = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            chain.iterations.push(it);
            chain.draws.push(vals);
        }
        Ok(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ChainMetadata {
        ChainMetadata {
            seed: 1,
            iterations: 10,
            burnin: 2,
            thin: 1,
            block_size: 2,
            acceptance_rates: vec![0.5],
            wall_seconds: 0.0,
            final_block_size: 2,
            identity_violations: 0,
            identity_checks: 0,
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut chain = Chain::new(2, 3, 1, meta());
        let beta = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 0.1 + 0.2]);
        chain.push(3, &beta, &[-1.5]);
        chain.push(4, &(beta.clone() * 2.0), &[0.25]);
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,beta_1_1,beta_1_2,beta_1_3,beta_2_1,beta_2_2,beta_2_3,alpha_1\n"));
        let back = Chain::read_csv(buf.as_slice(), meta()).unwrap();
        assert_eq!(back, chain);
        assert_eq!(back.beta(0), beta);
        assert_eq!(back.alpha(1), &[0.25]);
    }

    #[test]
    fn empty_mean() {
        assert!(matches!(Chain::new(1, 1, 0, meta()).posterior_mean_beta(), Err(Error::EmptyChain)));
    }
}
