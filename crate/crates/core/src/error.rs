use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation in column `{column}`: {message}")]
    Schema { column: String, message: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid journey: {0}")]
    InvalidJourney(String),

    #[error("selection contract violated: {0}")]
    SelectionContract(String),

    #[error("filter contract violated: {0}")]
    FilterContract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model has not been updated yet (cold start)")]
    ColdStart,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    Step {
        step: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_step(self, step: i64) -> Self {
        Error::Step { step, source: Box::new(self) }
    }
}
