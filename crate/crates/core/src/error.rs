use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the structuring pipeline.
#[derive(Debug, Error)]
pub enum CfeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("load {load}: target {target} is unattainable; maximum attainable {measure} is {max_attainable:.6}")]
    Infeasible {
        load: usize,
        target: f64,
        measure: &'static str,
        max_attainable: f64,
    },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("correlation matrix repair distance {distance:.4} exceeds tolerance {tolerance}")]
    Correlation { distance: f64, tolerance: f64 },

    #[error("non-finite function value at probe point {0:?}")]
    NonFinite(Vec<f64>),
}

impl CfeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CfeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CfeError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        CfeError::Validation(message.into())
    }
}

pub type Result<T, E = CfeError> = std::result::Result<T, E>;
