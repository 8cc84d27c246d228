use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },
    #[error("sample {value} at {location} is outside {range}")]
    OutOfRange {
        value: String,
        location: String,
        range: &'static str,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("{what} must be zero outside its mask; first violation at row {row}, col {col}")]
    ZeroFillViolated {
        what: &'static str,
        row: usize,
        col: usize,
    },
    #[error("non-finite value produced at sampling step {step} (timestep {timestep})")]
    Diverged { step: usize, timestep: usize },
    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
}

impl Error {
    pub(crate) fn dims(what: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            what,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
