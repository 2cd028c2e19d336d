use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("layer index {index} out of range 0..={max}")]
    LayerOutOfRange { index: usize, max: usize },

    #[error(
        "tokenization mismatch for pair ({female}, {male}): {detail}; choose single-piece words"
    )]
    PairTokenization {
        female: String,
        male: String,
        detail: String,
    },

    #[error("bridge error: {0}")]
    Bridge(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("missing predictions for sentence ids {0:?}")]
    MissingPredictions(Vec<usize>),

    #[error("count mismatch in {what}: declared {declared}, observed {observed}")]
    CountMismatch {
        what: String,
        declared: usize,
        observed: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
