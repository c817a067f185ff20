use std::path::PathBuf;

/// Errors raised anywhere in the representation and clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. Line numbers are 1-based and count the header;
    /// columns are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Format {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("duplicate series ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("series with missing or ragged values: {}", .0.join(", "))]
    MissingValues(Vec<String>),

    #[error("invalid panel: {0}")]
    Validation(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("observation {value} outside binning range [{low}, {high})")]
    OutOfRange { value: f64, low: f64, high: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("incompatible histogram grids: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate subsample: {0}")]
    DegenerateSample(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Output {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::DuplicateIds(_)
            | Error::MissingValues(_)
            | Error::Validation(_)
            | Error::InsufficientData { .. }
            | Error::Json(_) => ErrorKind::Input,
            Error::Parameter(_) | Error::DegenerateSample(_) | Error::Output { .. } => ErrorKind::Config,
            Error::OutOfRange { .. } | Error::Dimension { .. } | Error::GridMismatch(_) => {
                ErrorKind::Internal
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Config,
    Internal,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
