use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("primal-dual iterate became non-finite at iteration {0}")]
    Diverged(usize),

    #[error("empty scribble for label {0}")]
    EmptyScribble(usize),

    #[error("segmentation needs at least two labeled classes, got {0}")]
    TooFewLabels(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("cancelled")]
    Cancelled,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
