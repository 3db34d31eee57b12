use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("singular information matrix (reciprocal condition {rcond:.3e})")]
    SingularInformation { rcond: f64 },

    #[error("estimated density f0 vanishes at the quantile for s = {s}")]
    VanishingDensity { s: f64 },

    #[error("optimizer did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("bootstrap refit failed in {failed} of {total} replicates")]
    Bootstrap { failed: usize, total: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
