use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("example {index}: {tokens} tokens but {labels} labels")]
    LengthMismatch {
        index: usize,
        tokens: usize,
        labels: usize,
    },

    #[error("unknown intent `{0}`")]
    UnknownIntent(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("malformed payload `{text}`: {reason}")]
    Payload { text: String, reason: String },

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("session id must not be empty")]
    EmptySessionId,

    #[error("session `{0}` already exists")]
    SessionExists(String),

    #[error("session `{0}` not found")]
    SessionNotFound(String),

    #[error("story `{story}`: {reason}")]
    Story { story: String, reason: String },

    #[error("conflicting stories `{first}` and `{second}`: same state predicts `{first_action}` and `{second_action}`")]
    StoryConflict {
        first: String,
        second: String,
        first_action: String,
        second_action: String,
    },

    #[error("policy does not reproduce the training stories: {mismatches} of {total} steps wrong after {epochs} epochs")]
    PolicyFit {
        mismatches: usize,
        total: usize,
        epochs: usize,
    },

    #[error("duplicate dataset id `{0}`")]
    DuplicateDataset(String),

    #[error("template file: {0}")]
    Template(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("model bundle format {found} is not supported (expected {expected})")]
    BundleVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
