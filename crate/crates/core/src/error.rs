use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation and classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row} is empty")]
    EmptyRow { row: usize },

    #[error("label column {0} not found")]
    MissingLabelColumn(String),

    #[error("fewer than 2 classes")]
    FewerThanTwoClasses,

    #[error("class {class} has {count} samples, need at least {required}")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("unknown class {0}")]
    UnknownClass(String),

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("admissible edge set does not connect all {n} points")]
    Disconnected { n: usize },

    #[error("membership contains a single group")]
    SingleGroup,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model document: {0}")]
    Model(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Coarse failure category, used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
