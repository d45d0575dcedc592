use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("duplicate node id {0}")]
    DuplicateNode(u64),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph contains a cycle")]
    Cyclic,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("seed {0} cannot reach an illicit node; walks would not terminate")]
    WouldNotTerminate(u64),

    #[error("single-class training set")]
    SingleClass,

    #[error("single-class labels; metric is undefined")]
    SingleClassLabels,

    #[error("non-finite value in feature matrix at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("empty {0} split")]
    EmptySplit(&'static str),

    #[error("feature table: {0}")]
    FeatureTable(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 2 for usage or validation problems,
    /// 1 for everything that failed while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 1,
            Error::SingleClass | Error::SingleClassLabels | Error::WouldNotTerminate(_) => 1,
            _ => 2,
        }
    }
}
