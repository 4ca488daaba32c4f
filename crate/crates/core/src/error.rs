//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (non-finite value, dimension
    /// mismatch, malformed configuration, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A least-squares fit had too few or degenerate data.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A mixture model violated its structural invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A data file could not be parsed.
    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
