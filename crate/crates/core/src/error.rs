use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input value failed validation. `field` is a dotted
    /// path such as `model.couplings`.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("states {first} and {second} are degenerate (gap {gap:e} cm^-1 below tolerance {tol:e})")]
    DegenerateStates {
        first: usize,
        second: usize,
        gap: f64,
        tol: f64,
    },

    #[error("Hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("time axis is not uniform")]
    NonUniformAxis,

    #[error("numerical check failed: {0}")]
    Check(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
