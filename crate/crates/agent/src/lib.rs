//! Provider-aware recommender agent trained with REINFORCE.
//!
//! The reward for recommending a document mixes the user's realized return
//! with the modeled uplift in its provider's utility: how much better off
//! the provider is for having been recommended at that step than if that
//! single recommendation had gone elsewhere.

pub mod actor;
pub mod agent;
pub mod error;
pub mod features;
pub mod rollout;
pub mod utility;

pub use actor::{Actor, ActorSample, CandidateGroup, CandidateSnapshot};
pub use agent::{AgentConfig, EcoAgent, UpdateStats};
pub use error::AgentError;
pub use features::{topic_one_hot, user_step_input, ProviderStepFeature};
pub use rollout::{
    argmax, random_action, run_episode, ActMode, ActSession, Episode, Policy, RecommendationEvent,
};
pub use utility::{UtilityModel, UtilitySequence};
