use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("no topics found under {0}")]
    NoTopics(PathBuf),

    #[error("topic {0:?} has no documents")]
    EmptyTopic(String),

    #[error("duplicate topic id {0:?}")]
    DuplicateTopic(String),

    #[error("document {doc:?} in topic {topic:?} contains no sentences")]
    EmptyDocument { topic: String, doc: String },

    #[error("{path}:{line}: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("missing embedding for key {0:?}")]
    MissingEmbedding(String),

    #[error("duplicate embedding key {0:?}")]
    DuplicateEmbedding(String),

    #[error("non-finite embedding component for {0:?}")]
    NonFiniteEmbedding(String),

    #[error("embedding provider failed: {0}")]
    Provider(String),

    #[error("topic {0:?} has no reference summaries")]
    MissingReferences(String),

    #[error("no summary supplied for topic {0:?}")]
    MissingSummary(String),
}

impl Error {
    /// True for failures originating in an embedding provider (file lookup,
    /// remote transport, malformed provider output).
    pub fn is_provider(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::MissingEmbedding(_)
                | Error::DuplicateEmbedding(_)
                | Error::NonFiniteEmbedding(_)
                | Error::Provider(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
