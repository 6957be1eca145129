use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: timestamp {timestamp} is not after the previous sample")]
    NonMonotonic {
        path: PathBuf,
        line: u64,
        timestamp: String,
    },

    #[error("{path}:{line}: timestamp {timestamp} is off the {cadence_min}-minute grid")]
    Cadence {
        path: PathBuf,
        line: u64,
        timestamp: String,
        cadence_min: u32,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("station {station}: calendar month {month} has no observed values to impute from")]
    Imputation { station: String, month: u32 },

    #[error("series for station {station} has missing values; impute first")]
    MissingValues { station: String },

    #[error("no convergence after {iterations} iterations: {what}")]
    NonConvergence { what: String, iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::NonConvergence { .. } => 4,
            _ => 3,
        }
    }
}
