use std::path::PathBuf;

use crate::classifier::CheckpointRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A theorem precondition (e.g. diagonal dominance) does not hold.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// Training produced a non-finite loss or parameter. `last` is the most
    /// recent checkpoint recorded while everything was still finite.
    #[error("training diverged at step {step}")]
    TrainingDiverged {
        step: usize,
        last: Option<Box<CheckpointRecord>>,
    },

    #[error("search space of {size} assignments exceeds the limit of {limit}")]
    Capacity { size: f64, limit: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
