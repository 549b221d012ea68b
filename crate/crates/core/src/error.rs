use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("empirical CDF needs at least one sample")]
    EmptySamples,
    #[error("invalid quota: {0}")]
    InvalidQuota(String),
    #[error("need at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("report {value} outside [0, {upper}]")]
    ReportOutOfRange { value: f64, upper: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(String),
}
