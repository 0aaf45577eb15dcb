use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures reported by a model backend.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("input too long for backend: {0}")]
    InputTooLong(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("backend rejected request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown class token {0:?}")]
    UnknownClassToken(String),
    #[error("cannot parse component output {0:?}")]
    UnparseableOutput(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("generation result carries no class log-probabilities")]
    MissingClassLogprobs,
    #[error("label {0:?} has no two-class mapping")]
    UnsupportedLabel(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("paired t-test needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown format {0:?}")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
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

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
