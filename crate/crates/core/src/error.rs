use std::path::PathBuf;

use thiserror::Error;

use crate::store::{EntityId, Relation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownConfigKeys(Vec<String>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("conflicting label for ({relation}, {first}, {second}): stored {stored}, new {new}")]
    ConflictingTriple {
        relation: Relation,
        first: EntityId,
        second: EntityId,
        stored: i8,
        new: i8,
    },

    #[error("{relation} expects ({expected}), got ({got})")]
    Schema {
        relation: Relation,
        expected: String,
        got: String,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("selection budget {m} invalid for pool of size {pool}")]
    Budget { m: usize, pool: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ground truth required for this protocol")]
    GroundTruthRequired,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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
}
