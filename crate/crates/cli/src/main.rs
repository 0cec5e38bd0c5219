//! `combireg`: simulate, fit and query constrained binary regressions.

mod commands;
mod config;
mod data;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use combireg::Error;

/// Exit status 1 covers malformed input, status 2 domain failures.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InfeasibleRow(i) => {
                CliError::Domain(format!("data row {} (CSV line {}) violates the constraints", i + 1, i + 2))
            }
            Error::Parse(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::ShapeMismatch(_)
            | Error::InvalidEntry { .. }
            | Error::SelfPair(_) => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "combireg", version, about = "Bayesian regression for constrained binary responses")]
struct Cli {
    /// Worker threads for the parallel latent sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with [sampler], [simulate] and [predict] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output (RUST_LOG also works).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report total unimodularity, integrality and the number of feasible outcomes.
    #[command(alias = "check-tum")]
    Check(CheckArgs),
    /// Generate a synthetic data set with known parameters.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler.
    Fit(FitArgs),
    /// Posterior predictive outcome laws, event probabilities or curves.
    Predict(PredictArgs),
    /// Autocorrelation and posterior summaries of a chain.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Constraint system as JSON.
    #[arg(long, conflicts_with = "emit", required_unless_present = "emit")]
    pub constraints: Option<PathBuf>,
    /// Build a system instead: `cardinality:D:M`, `matching:L:R[:a-b,...]`,
    /// `partial-order:D:j-k,...` or `box:D` (0-based coordinates).
    #[arg(long)]
    pub emit: Option<String>,
    /// Where to write the emitted JSON; without it the JSON goes to stdout.
    #[arg(long, requires = "emit")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "scenario")]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta_scale: Option<f64>,
    /// Intercept-only data at this comma-separated mean.
    #[arg(long, allow_hyphen_values = true)]
    pub intercept: Option<String>,
    /// Built-in scenario; `duck` is the only one.
    #[arg(long)]
    pub scenario: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SamplerArgs {
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub hitrun_steps: Option<usize>,
    /// Re-solve the transform after each latent move and count mismatches.
    #[arg(long)]
    pub check_identity: bool,
    /// Keep the block size fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, required_unless_present = "hierarchy")]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario JSON selecting the hierarchical model.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// One-row chain with the true parameters; prints the posterior-mean RMSE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, required_unless_present = "hierarchy")]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated covariates; defaults to `1` for intercept chains.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Event query JSON; writes event.json instead of law.csv.
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[arg(long)]
    pub mc_draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenario JSON; writes matching-probability curves.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// `start:end:step` time grid for curves.
    #[arg(long)]
    pub grid: Option<String>,
    /// Condition curves on an unmatched same-species rival.
    #[arg(long)]
    pub competition: bool,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Defaults to metadata.json next to the chain.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub max_lag: usize,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::usage(e.to_string()))?;
    }
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Check(a) => commands::check(&a),
        Command::Simulate(a) => commands::simulate(&a, cfg),
        Command::Fit(a) => commands::fit(&a, cfg),
        Command::Predict(a) => commands::predict(&a, cfg),
        Command::Diagnose(a) => commands::diagnose(&a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
