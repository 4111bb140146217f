use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty core vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("no emotion scores recorded for document `{0}`")]
    MissingScores(String),

    #[error("no embedding recorded for phrase `{0}`")]
    MissingEmbedding(String),

    #[error("degenerate value: {0}")]
    Degenerate(String),

    #[error("insufficient history: need {required} days, have {available}")]
    InsufficientHistory { required: usize, available: usize },

    #[error("missing feature block `{0}`")]
    MissingBlock(String),

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("corrupt file {path} at offset {offset}: {reason}")]
    Corrupt { path: PathBuf, offset: u64, reason: String },

    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

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

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
