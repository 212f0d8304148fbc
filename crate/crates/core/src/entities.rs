use serde::{Deserialize, Serialize};

use crate::satisfaction::SatisfactionFn;
use crate::topic::TopicVector;

pub type DocId = u64;
pub type UserId = usize;
pub type ProviderId = usize;

/// One content item. The topic is stored as its hot index; see
/// [`Document::topic_vector`] for the one-hot form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub topic: usize,
    /// Perceived by users, hidden from the recommender.
    pub quality: f64,
    pub provider_id: ProviderId,
    pub created_at: usize,
}

impl Document {
    pub fn topic_vector(&self, num_topics: usize) -> TopicVector {
        TopicVector::one_hot(self.topic, num_topics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: UserId,
    /// Unit-norm topic preference.
    pub preference: TopicVector,
    /// Weight of quality against relevance, in `[0, 1]`.
    pub quality_sensitivity: f64,
    pub preference_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderState {
    pub id: ProviderId,
    /// Group index within the environment config.
    pub group: usize,
    pub preference: TopicVector,
    pub accumulated_feedback: f64,
    pub satisfaction: f64,
    pub no_rec_drift: f64,
    pub exposure_sensitivity: f64,
    pub feedback_sensitivity: f64,
    pub preference_drift: f64,
    pub satisfaction_fn: SatisfactionFn,
    pub viability_threshold: f64,
    pub documents: Vec<DocId>,
    pub creation_rate: f64,
    pub quality_mean: f64,
    pub quality_std: f64,
    pub viable: bool,
}

impl ProviderState {
    pub fn is_viable(&self) -> bool {
        self.viable
    }
}
