//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input (series shapes, label vectors,
    /// file contents).
    #[error("input error: {0}")]
    Input(String),

    /// Invalid configuration value or unparseable config.
    #[error("config error: {0}")]
    Config(String),

    /// Data admits no meaningful answer at the requested precision
    /// (rank-deficient Gram/Hankel, empty anchor set, all-zero atoms).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A window reached past the available samples.
    #[error("sample index {index} out of range [{lo}, {hi}]")]
    OutOfRange { index: i64, lo: i64, hi: i64 },

    /// Logarithmic map requested for a pair at (or numerically at) the cut
    /// locus: some principal angle is within `tol` of pi/2.
    #[error("cut locus: a principal angle is within {tol:e} of pi/2")]
    CutLocus { tol: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for degenerate data, 1 for anything
    /// else that is an error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
