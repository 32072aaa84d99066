use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("stability condition violated: rate {rate} exceeds sustainable rate {sustainable}")]
    Stability { rate: f64, sustainable: f64 },

    #[error("quadrature did not converge: residual {residual:e} above tolerance {tolerance:e}")]
    Quadrature { residual: f64, tolerance: f64 },

    #[error("training diverged at epoch {epoch}: {what} is not finite")]
    Divergence { epoch: usize, what: &'static str },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("config {field}: {msg}")]
    Config { field: String, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
