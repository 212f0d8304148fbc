use thiserror::Error;

use crate::entities::{DocId, ProviderId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("num_topics must be at least 2, got {0}")]
    TooFewTopics(usize),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("malformed config JSON: {0}")]
    Json(String),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("document {0} is not in the current candidate set")]
    InvalidAction(DocId),
    #[error("expected {expected} actions (one per user), got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("episode is finished")]
    EpisodeDone,
    #[error("provider {0} is not viable")]
    ProviderNotViable(ProviderId),
}
