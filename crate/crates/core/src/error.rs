use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("criterion `{criterion}`: value {value:?} produces no terms after analysis")]
    EmptyQuery { criterion: String, value: String },

    #[error("criterion `{criterion}`: query document carries no registry ids")]
    EmptyIds { criterion: String },

    #[error("query document for `{found}` stored in index `{expected}`")]
    CriterionMismatch { expected: String, found: String },

    #[error("entry `{id}`")]
    Entry {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("duplicate registry id `{0}`")]
    DuplicateId(String),

    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),

    #[error("invalid match configuration: {0}")]
    Config(String),

    #[error("gold record {index}: {message}")]
    Gold { index: usize, message: String },

    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
