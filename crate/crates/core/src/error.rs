use thiserror::Error;

/// Errors raised by the approximation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset has no samples")]
    EmptyDataset,

    #[error("points are not collinear; the q = 1 reduction requires x to be a scalar multiple of y")]
    NotCollinear,

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("missing {0}")]
    Missing(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Error {
    Error::OutOfRange {
        what,
        detail: detail.into(),
    }
}
