//! Per-episode metrics.

use ecosim_agent::{EcoAgent, Episode};
use ecosim_core::ProviderStepOutcome;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// A provider's step reward split by the raw feedback component it came
/// from, in proportion to each component's share of the feedback.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardDecomposition {
    pub drift_part: f64,
    pub rec_part: f64,
    pub feedback_part: f64,
}

pub fn decompose_provider_reward(step: &ProviderStepOutcome) -> RewardDecomposition {
    let p = step.feedback;
    let r = step.reward;
    if p == 0.0 {
        return RewardDecomposition {
            drift_part: r,
            ..Default::default()
        };
    }
    let rec_part = step.exposure_part / p * r;
    let feedback_part = step.user_feedback_part / p * r;
    RewardDecomposition {
        // Remainder, so the three parts add up to r exactly.
        drift_part: r - rec_part - feedback_part,
        rec_part,
        feedback_part,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RolloutMetrics {
    /// Summed over users and steps.
    pub user_accumulated_reward: f64,
    /// Summed over providers and steps.
    pub provider_accumulated_reward: f64,
    pub user_reward_per_user: f64,
    pub provider_reward_per_provider: f64,
    pub viable_providers: usize,
    /// Viable providers before the first step and after every step, padded
    /// to the horizon if the episode ended early.
    pub viable_series: Vec<usize>,
    pub rec_part: f64,
    pub feedback_part: f64,
    pub drift_part: f64,
    pub group_rec_counts: Vec<f64>,
    pub group_viable: Vec<usize>,
    pub group_provider_reward: Vec<f64>,
    /// (provider satisfaction before the step, predicted uplift) per
    /// recommendation event.
    pub uplift_pairs: Vec<(f64, f64)>,
}

impl RolloutMetrics {
    pub fn from_episode(
        episode: &Episode,
        horizon: usize,
        group_of: &[usize],
        num_groups: usize,
    ) -> RolloutMetrics {
        let mut m = RolloutMetrics {
            user_accumulated_reward: episode.user_accumulated_reward(),
            provider_accumulated_reward: episode.provider_accumulated_reward(),
            group_rec_counts: vec![0.0; num_groups],
            group_viable: vec![0; num_groups],
            group_provider_reward: vec![0.0; num_groups],
            ..Default::default()
        };
        m.user_reward_per_user = m.user_accumulated_reward / episode.num_users as f64;
        m.provider_reward_per_provider =
            m.provider_accumulated_reward / episode.num_providers as f64;

        let mut viable = vec![true; episode.num_providers];
        m.viable_series.push(episode.num_providers);
        for o in &episode.outcomes {
            for p in &o.providers {
                let d = decompose_provider_reward(p);
                m.rec_part += d.rec_part;
                m.feedback_part += d.feedback_part;
                m.drift_part += d.drift_part;
                m.group_rec_counts[p.group] += p.count() as f64;
                m.group_provider_reward[p.group] += p.reward;
                if p.left {
                    viable[p.provider_id] = false;
                }
            }
            m.viable_series.push(viable.iter().filter(|&&v| v).count());
        }
        let last = *m.viable_series.last().unwrap_or(&0);
        m.viable_series.resize(horizon + 1, last);
        m.viable_providers = last;
        for (p, &v) in viable.iter().enumerate() {
            if v {
                m.group_viable[group_of[p]] += 1;
            }
        }

        for e in &episode.events {
            if let Some(u) = e.uplift() {
                if let Some(p) = episode.outcomes[e.step].provider(e.provider_id) {
                    m.uplift_pairs.push((p.satisfaction - p.reward, u));
                }
            }
        }
        m
    }

    /// Evaluation metrics for an agent's episode, with predicted uplifts
    /// filled in from the agent's provider model.
    pub fn from_agent_episode(
        agent: &EcoAgent,
        mut episode: Episode,
        horizon: usize,
        group_of: &[usize],
        num_groups: usize,
    ) -> Result<RolloutMetrics, HarnessError> {
        agent.fill_uplifts(&mut episode)?;
        Ok(Self::from_episode(&episode, horizon, group_of, num_groups))
    }
}
