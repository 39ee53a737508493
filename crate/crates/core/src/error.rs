use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is not finite ({value})")]
    NonFinite { what: String, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fidelity {k} is outside the supported range 1..={k_max}")]
    FidelityOutOfRange { k: usize, k_max: usize },

    #[error("truncation draw exceeded the fidelity cap {k_max}")]
    FidelityCapExceeded { k_max: usize },

    #[error("level {level} produced a non-finite log density ({value})")]
    NonFiniteLevel { level: usize, value: f64 },

    #[error("cursor is at level {cursor} but level {requested} was requested")]
    CursorMismatch { cursor: usize, requested: usize },

    #[error("matrix is not positive definite after {attempts} jitter attempts")]
    NotPositiveDefinite { attempts: usize },

    #[error("conjugate gradient broke down at iteration {iteration} (curvature {curvature})")]
    CgBreakdown { iteration: usize, curvature: f64 },

    #[error("ODE solution became non-finite at t = {time}")]
    OdeBlowUp { time: f64 },

    #[error("ODE solver exceeded {max_steps} steps")]
    OdeStepLimit { max_steps: u64 },

    #[error("elliptical slice sampling did not terminate within {max_iterations} proposals")]
    EssNoProgress { max_iterations: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sum of signs is zero; the sign-corrected estimate is undefined, run the chain longer")]
    ZeroSignSum,

    #[error("chain failed at iteration {iteration}: {source}")]
    Chain {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
