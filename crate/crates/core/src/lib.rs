//! Ecosystem simulator: users, content providers and the documents they
//! create, driven by a recommender that picks one document per user per step.
//!
//! All randomness is counter-based (see [`rng`]) so an episode is a pure
//! function of its [`EnvironmentConfig`] and seed.

pub mod config;
pub mod dynamics;
pub mod entities;
pub mod env;
pub mod error;
pub mod rng;
pub mod sampling;
pub mod satisfaction;
pub mod topic;
pub mod trajectory;

pub use config::{EnvironmentConfig, ProviderGroupConfig, UniformRange, UserParamConfig};
pub use dynamics::{
    discounted_return, provider_feedback, provider_topic_distribution, update_provider,
    update_user, user_reward, ProviderUpdate,
};
pub use entities::{DocId, Document, ProviderId, ProviderState, UserId, UserState};
pub use env::{
    Candidate, Environment, Observation, ProviderObservation, ProviderStepOutcome,
    ProviderStepRecord, Recommendation, StepOutcome, UserObservation, UserStepRecord,
};
pub use error::{ConfigError, EnvError};
pub use rng::{derive_seed, Purpose, RngStream};
pub use satisfaction::{SatisfactionFn, SatisfactionKind};
pub use topic::TopicVector;
