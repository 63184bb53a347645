use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },

    #[error("line {line}: duplicate tweet id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("token `{0}` is not in the vocabulary")]
    TokenNotInVocab(String),

    #[error("unknown word `{0}`")]
    UnknownWord(String),

    #[error("cannot compute cosine similarity of a zero vector")]
    ZeroVector,

    #[error("format version mismatch: found `{found}`, expected `{expected}`")]
    VersionMismatch { found: String, expected: String },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("shape inconsistency: {0}")]
    ShapeInconsistency(String),

    #[error("all tokens are out of vocabulary")]
    AllTokensUnknown,

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("annotation references unknown tweet id `{0}`")]
    DanglingId(String),

    #[error("class `{label}` has {available} examples, {required} required")]
    InsufficientClassExamples {
        label: String,
        available: usize,
        required: usize,
    },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("trace does not match sequence: {0}")]
    TraceMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
