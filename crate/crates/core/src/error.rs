use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("singular least-squares system: {0}")]
    Singular(String),

    #[error("free run diverged at step {step} (|y| = {value:e})")]
    Divergence { step: usize, value: f64 },

    #[error("correlation undefined: neuron {neuron} has zero variance")]
    UndefinedCorrelation { neuron: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("{path}:{line}: {message}")]
    Ingestion {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("at grid point L={length}, rho={rho}: {source}")]
    GridPoint {
        length: usize,
        rho: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension(_)
            | Error::Parameter(_)
            | Error::Unsupported(_)
            | Error::Config(_)
            | Error::Json(_) => ErrorClass::Config,
            Error::Domain(_)
            | Error::Ingestion { .. }
            | Error::Io(_)
            | Error::UndefinedCorrelation { .. }
            | Error::Training(_) => ErrorClass::Data,
            Error::Convergence { .. }
            | Error::DegenerateSpectrum(_)
            | Error::Generation(_)
            | Error::Singular(_)
            | Error::Divergence { .. } => ErrorClass::Numeric,
            Error::GridPoint { source, .. } => source.class(),
        }
    }

    pub(crate) fn ingestion(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
