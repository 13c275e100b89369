use thiserror::Error;

/// Errors raised by the solvers, transport routines and config loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid metric space: {0}")]
    InvalidSpace(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("index {index} out of range for space of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    CapExceeded { what: String, needed: u128, cap: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn cap(what: impl Into<String>, needed: u128, cap: u128) -> Self {
        Error::CapExceeded { what: what.into(), needed, cap }
    }

    /// True for errors that come from caps or bad parameters rather than
    /// invalid model data.
    pub fn is_parameter_error(&self) -> bool {
        matches!(self, Error::CapExceeded { .. } | Error::Domain(_) | Error::LengthMismatch { .. })
    }
}
