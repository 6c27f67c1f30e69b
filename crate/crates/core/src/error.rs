use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bandwidth h = {0}: must be finite and > 0")]
    InvalidBandwidth(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("degenerate sample: need at least {needed} observations, got {got}")]
    DegenerateSample { needed: usize, got: usize },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e} after {evaluations} evaluations)")]
    Quadrature {
        requested: f64,
        achieved: f64,
        evaluations: usize,
    },

    #[error("numeric check failed: {0}")]
    Tolerance(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn field(field: &str, message: impl Into<String>) -> Self {
        Error::ConfigField {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. } | Error::ConfigField { .. } | Error::UnknownModel(_) => 2,
            Error::Io { .. } | Error::Data { .. } => 4,
            Error::Quadrature { .. } | Error::Tolerance(_) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}
