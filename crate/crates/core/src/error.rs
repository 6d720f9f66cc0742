use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {operand}: expected {expected}, found {found}")]
    Shape { operand: &'static str, expected: String, found: String },

    #[error("span {index} has label {label:?} which is not in the tag set")]
    Labeling { index: usize, label: String },

    #[error("invalid BIO sequence at position {position}: {reason}")]
    Validation { position: usize, reason: String },

    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },

    #[error("document {doc_id:?}, annotation {index}: {reason}")]
    Annotation { doc_id: String, index: usize, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },

    #[error("unknown tag {0:?}")]
    UnknownTag(String),

    #[error("unknown entity class {0:?}")]
    UnknownClass(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance too large for exhaustive enumeration: {paths} paths (limit {limit})")]
    TooLarge { paths: u128, limit: u128 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value during training at epoch {epoch}, batch {batch}: {detail}")]
    Divergence { epoch: usize, batch: usize, detail: String },

    #[error("non-finite {0}")]
    NonFinite(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(operand: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape { operand, expected: expected.to_string(), found: found.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
