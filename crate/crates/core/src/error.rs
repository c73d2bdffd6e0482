use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate basis: residual norm {norm:e} at vector {index} (linearly dependent input)")]
    DegenerateBasis { index: usize, norm: f64 },

    #[error("basis collapsed during training at epoch {epoch}, module {module}: {source}")]
    TrainingCollapse {
        epoch: usize,
        module: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("not an orthonormal basis: max |BB^T - I| = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("class is empty: {0}")]
    EmptyClass(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient variance: minority samples are all identical")]
    InsufficientVariance,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("positive class is not the minority ({positive} positive vs {negative} negative rows)")]
    NotMinority { positive: usize, negative: usize },

    #[error("class {class} has {count} rows; at least {required} are needed")]
    TooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("SMOTE needs more than k={k} minority rows, found {found}")]
    TooFewMinority { k: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("incomplete result grid: {0}")]
    IncompleteGrid(String),

    #[error("non-finite value {value} at row {row}, column {column}")]
    NonFinite { row: usize, column: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::DegenerateBasis { .. }
            | Error::TrainingCollapse { .. }
            | Error::NotOrthonormal { .. }
            | Error::IncompleteGrid(_) => ErrorKind::Runtime,
            _ => ErrorKind::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
