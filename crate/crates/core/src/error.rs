use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("data row {0} violates the constraints")]
    InfeasibleRow(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid constraint entry {value} at ({row}, {col}); entries must be in {{-1, 0, 1}}")]
    InvalidEntry { row: usize, col: usize, value: i64 },
    #[error("size limit exceeded: {0}")]
    SizeLimitExceeded(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("partial-order pair relates coordinate {0} to itself")]
    SelfPair(usize),
    #[error("degenerate transform input: {0}")]
    DegenerateInput(String),
    #[error("constraint system is infeasible over the unit box")]
    Infeasible,
    #[error("response vector violates the constraints")]
    InfeasibleY,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("rejection sampler exhausted {0} proposals")]
    RejectionBudgetExhausted(usize),
    #[error("starting point is not strictly inside the dual polytope")]
    NotInterior,
    #[error("invalid interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("latent initialization failed for observation {0}")]
    InitFailed(usize),
    #[error("dual polytope empty for observation {0}")]
    EmptyDualPolytope(usize),
    #[error("group {0} has no members")]
    GroupEmpty(usize),
    #[error("conditioning event too rare: {hits} hits, need at least {required}")]
    ConditioningTooRare { hits: u64, required: u64 },
    #[error("series too short: length {len}, max lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("chain is empty")]
    EmptyChain,
    #[error("insufficient distinct points for spline basis: {0}")]
    InsufficientPoints(String),
    #[error("marginal likelihood estimate unstable (relative standard error {0:.3})")]
    EstimateUnstable(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
