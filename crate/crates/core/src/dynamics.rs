//! Per-entity transition rules. [`crate::env::Environment`] sequences these
//! into a full simultaneous step.

use crate::entities::{DocId, Document, ProviderState, UserState};
use crate::error::EnvError;
use crate::rng::RngStream;
use crate::sampling::sample_truncated_normal;
use crate::topic::TopicVector;

/// Smoothing added to every topic weight before normalizing.
pub const TOPIC_SMOOTHING: f64 = 1e-6;

/// `(1 - eta) * relevance + eta * quality`, where relevance is the user's
/// preference weight on the document's topic.
pub fn user_reward(user: &UserState, doc: &Document) -> f64 {
    let eta = user.quality_sensitivity;
    (1.0 - eta) * user.preference[doc.topic] + eta * doc.quality
}

/// Moves the preference toward the document's topic by `drift * reward` and
/// renormalizes. A move that lands exactly on zero keeps the old preference.
pub fn update_user(user: &mut UserState, doc: &Document, reward: f64) {
    let mut raw = user.preference.clone();
    raw.0[doc.topic] += user.preference_drift * reward;
    if let Some(unit) = raw.normalized() {
        user.preference = unit;
    }
}

/// Raw per-step feedback: drift plus exposure plus summed user reward.
pub fn provider_feedback(provider: &ProviderState, m: usize, sum_user_reward: f64) -> f64 {
    provider.no_rec_drift
        + provider.exposure_sensitivity * m as f64
        + provider.feedback_sensitivity * sum_user_reward
}

/// Distribution over topics for the provider's next documents: positive part
/// of the preference plus a small smoothing term, normalized. A preference
/// with no positive entries yields the uniform distribution.
pub fn provider_topic_distribution(provider: &ProviderState) -> Vec<f64> {
    let w: Vec<f64> = provider
        .preference
        .as_slice()
        .iter()
        .map(|&x| x.max(0.0) + TOPIC_SMOOTHING)
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Draws one document for a provider.
pub fn create_document(
    provider: &ProviderState,
    topic_dist: &[f64],
    rng: &mut RngStream,
    id: DocId,
    step: usize,
) -> Document {
    let topic = rng.categorical(topic_dist);
    let quality =
        sample_truncated_normal(rng, provider.quality_mean, provider.quality_std, -1.0, 1.0)
            .expect("provider quality parameters validated with the config");
    Document {
        id,
        topic,
        quality,
        provider_id: provider.id,
        created_at: step,
    }
}

/// Result of one provider transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderUpdate {
    /// Raw feedback added to the accumulator this step.
    pub feedback: f64,
    /// Satisfaction increment.
    pub reward: f64,
    pub new_documents: Vec<Document>,
    pub left: bool,
}

/// Applies one step of provider dynamics for the given recommendations
/// (document, user reward). New documents take consecutive ids starting at
/// `*next_doc_id`, which is advanced past them.
pub fn update_provider(
    provider: &mut ProviderState,
    recs: &[(&Document, f64)],
    rng: &mut RngStream,
    next_doc_id: &mut DocId,
    step: usize,
) -> Result<ProviderUpdate, EnvError> {
    if !provider.viable {
        return Err(EnvError::ProviderNotViable(provider.id));
    }
    let sum_reward: f64 = recs.iter().map(|(_, r)| r).sum();
    let feedback = provider_feedback(provider, recs.len(), sum_reward);
    let before = provider.satisfaction;
    provider.accumulated_feedback += feedback;
    provider.satisfaction = provider
        .satisfaction_fn
        .value(provider.accumulated_feedback);
    let reward = provider.satisfaction - before;

    if !recs.is_empty() {
        let mut raw: TopicVector = provider.preference.clone();
        for (doc, r) in recs {
            raw.0[doc.topic] += provider.preference_drift * r;
        }
        if let Some(unit) = raw.normalized() {
            provider.preference = unit;
        }
    }

    let count = (provider.creation_rate * reward.max(0.0)).round() as usize;
    let mut new_documents = Vec::with_capacity(count);
    if count > 0 {
        let dist = provider_topic_distribution(provider);
        for _ in 0..count {
            let doc = create_document(provider, &dist, rng, *next_doc_id, step);
            *next_doc_id += 1;
            provider.documents.push(doc.id);
            new_documents.push(doc);
        }
    }

    let left = provider.satisfaction < provider.viability_threshold;
    if left {
        provider.viable = false;
    }
    Ok(ProviderUpdate {
        feedback,
        reward,
        new_documents,
        left,
    })
}

/// Monte-Carlo discounted returns `Q_t = r_t + gamma * Q_{t+1}`, with no
/// bootstrap past the last reward.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (q, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *q = acc;
    }
    out
}
