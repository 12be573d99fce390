use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough observations for a stable fit.
    #[error("insufficient data: {what} (have {have}, need {need})")]
    InsufficientData {
        what: String,
        have: usize,
        need: usize,
    },

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Too many replicate fits failed inside a resampling loop.
    #[error("{failed} of {total} replicate fits failed; last error: {last}")]
    ReplicateFailures {
        failed: usize,
        total: usize,
        last: String,
    },

    /// A model is used before it has been trained or fitted.
    #[error("model not ready: {0}")]
    NotReady(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
