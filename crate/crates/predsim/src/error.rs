use std::path::PathBuf;

use thiserror::Error;

/// Which operand of a pairwise similarity caused the failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty{}", if .0.is_empty() { String::new() } else { format!(" ({})", .0) })]
    EmptyCorpus(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate token {0:?} in vector file")]
    DuplicateToken(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("token {0:?} not in vocabulary")]
    UnknownToken(String),

    #[error("source {0:?} not in model")]
    UnknownSource(String),

    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("similarity undefined: {side} vector has no variance under this conditioning")]
    UndefinedSimilarity { side: Side },

    #[error("{side} vector is zero")]
    ZeroVector { side: Side },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("incomplete similarity grid: missing cell ({media}, {issue}, {column})")]
    IncompleteGrid {
        media: String,
        issue: String,
        column: String,
    },

    #[error("party {0:?} has no bloc assignment and is not excluded")]
    UnassignedParty(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
