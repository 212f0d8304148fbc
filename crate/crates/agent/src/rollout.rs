//! Running one episode under a policy and recording everything the update
//! and the metrics need.

use ecosim_core::{
    DocId, Environment, EnvironmentConfig, Observation, ProviderId, Purpose, RngStream, StepOutcome,
};

use crate::actor::CandidateSnapshot;
use crate::agent::EcoAgent;
use crate::error::AgentError;
use crate::features::{user_step_input, ProviderStepFeature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActMode {
    /// Draw from the policy (training and default evaluation).
    #[default]
    Sample,
    /// Take the most probable document.
    Greedy,
}

/// One recommendation made by the agent, plus the values the update fills
/// in later.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationEvent {
    pub user_id: usize,
    pub step: usize,
    pub doc_id: DocId,
    pub provider_id: ProviderId,
    /// Index into the episode's snapshots (equal to `step`).
    pub snapshot: usize,
    pub chosen_group: usize,
    pub log_prob: f64,
    /// Encoder state the policy acted on; treated as a constant by the actor
    /// gradient.
    pub user_state: Vec<f64>,
    pub user_reward: f64,
    pub user_return: Option<f64>,
    pub factual_utility: Option<f64>,
    pub counterfactual_utility: Option<f64>,
}

impl RecommendationEvent {
    pub fn uplift(&self) -> Option<f64> {
        Some(self.factual_utility? - self.counterfactual_utility?)
    }
}

/// A finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub seed: u64,
    /// Parameter version of the agent that generated the episode; 0 for
    /// non-learning policies.
    pub param_version: u64,
    pub num_users: usize,
    pub num_providers: usize,
    pub num_topics: usize,
    pub initial_satisfaction: Vec<f64>,
    pub outcomes: Vec<StepOutcome>,
    /// Candidate snapshots per step (empty for non-learning policies).
    pub snapshots: Vec<CandidateSnapshot>,
    pub events: Vec<RecommendationEvent>,
}

impl Episode {
    /// Realized user rewards of `user`, one per step in which it was served.
    pub fn user_rewards(&self, user: usize) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.user_rewards[user]).collect()
    }

    /// Per-step model inputs, features and rewards of `provider` up to and
    /// including the step it left.
    pub fn provider_steps(&self, provider: ProviderId) -> Vec<(ProviderStepFeature, f64)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.provider(provider))
            .map(|p| {
                (
                    ProviderStepFeature::from_recommendations(
                        &p.recommendations,
                        p.inventory_size,
                        self.num_topics,
                    ),
                    p.reward,
                )
            })
            .collect()
    }

    pub fn user_accumulated_reward(&self) -> f64 {
        self.outcomes
            .iter()
            .flat_map(|o| o.user_rewards.iter())
            .sum()
    }

    pub fn provider_accumulated_reward(&self) -> f64 {
        self.outcomes
            .iter()
            .flat_map(|o| o.providers.iter())
            .map(|p| p.reward)
            .sum()
    }
}

/// Uniform choice over the candidate set; `None` when it is empty.
pub fn random_action(obs: &Observation, rng: &mut RngStream) -> Option<DocId> {
    if obs.candidates.is_empty() {
        None
    } else {
        Some(obs.candidates[rng.below(obs.candidates.len())].doc_id)
    }
}

/// Incremental encoder states for one running episode, so acting costs one
/// recurrent step per entity per step rather than a full re-encode.
#[derive(Debug, Clone)]
pub struct ActSession {
    user_states: Vec<Vec<f64>>,
    provider_states: Vec<Vec<f64>>,
    num_topics: usize,
}

impl ActSession {
    pub fn new(agent: &EcoAgent, num_users: usize, num_providers: usize) -> Self {
        ActSession {
            user_states: vec![agent.user_model.encoder.initial_state(); num_users],
            provider_states: vec![agent.provider_model.encoder.initial_state(); num_providers],
            num_topics: agent.num_topics(),
        }
    }

    pub fn user_state(&self, user: usize) -> &[f64] {
        &self.user_states[user]
    }

    pub fn provider_state(&self, provider: ProviderId) -> &[f64] {
        &self.provider_states[provider]
    }

    pub fn snapshot(&self, obs: &Observation) -> CandidateSnapshot {
        CandidateSnapshot::build(
            obs.num_topics,
            obs.candidates.iter().map(|c| {
                (
                    c.doc_id,
                    c.topic,
                    c.provider_id,
                    self.provider_states[c.provider_id].as_slice(),
                )
            }),
        )
    }

    /// Picks one document per user. Randomness for user `u` at step `t`
    /// comes from its own stream, so results do not depend on evaluation
    /// order.
    pub fn act(
        &self,
        agent: &EcoAgent,
        obs: &Observation,
        snapshot: &CandidateSnapshot,
        seed: u64,
        mode: ActMode,
    ) -> Result<Vec<RecommendationEvent>, AgentError> {
        let actor = &agent.actor;
        let embeddings = actor.candidate_embeddings(snapshot)?;
        let mut events = Vec::with_capacity(obs.users.len());
        for user in &obs.users {
            let state = &self.user_states[user.id];
            let u = actor.user_embedding(state)?;
            let logits = actor.group_logits(&u, &embeddings);
            let (log_z, _) = actor.group_probabilities(&logits, snapshot);
            let probs: Vec<f64> = snapshot
                .doc_group
                .iter()
                .map(|&g| (logits[g] - log_z).exp())
                .collect();
            let idx = match mode {
                ActMode::Sample => {
                    let mut rng =
                        RngStream::new(seed, Purpose::Action, user.id as u64, obs.step as u64);
                    rng.categorical(&probs)
                }
                ActMode::Greedy => argmax(&probs),
            };
            let g = snapshot.doc_group[idx];
            events.push(RecommendationEvent {
                user_id: user.id,
                step: obs.step,
                doc_id: snapshot.doc_ids[idx],
                provider_id: snapshot.groups[g].provider_id,
                snapshot: obs.step,
                chosen_group: g,
                log_prob: logits[g] - log_z,
                user_state: state.clone(),
                user_reward: 0.0,
                user_return: None,
                factual_utility: None,
                counterfactual_utility: None,
            });
        }
        Ok(events)
    }

    /// Advances the encoder states with what the step revealed.
    pub fn observe(
        &mut self,
        agent: &EcoAgent,
        outcome: &StepOutcome,
        actions: &[Option<DocId>],
        topics: &[Option<usize>],
    ) -> Result<(), AgentError> {
        for (uid, (a, topic)) in actions.iter().zip(topics).enumerate() {
            if let (Some(_), Some(topic)) = (a, topic) {
                let x = user_step_input(*topic, outcome.user_rewards[uid], self.num_topics);
                self.user_states[uid] =
                    agent.user_model.encoder.step(&x, &self.user_states[uid])?;
            }
        }
        for p in &outcome.providers {
            let f = ProviderStepFeature::from_recommendations(
                &p.recommendations,
                p.inventory_size,
                self.num_topics,
            );
            self.provider_states[p.provider_id] = agent
                .provider_model
                .encoder
                .step(&f.to_input(), &self.provider_states[p.provider_id])?;
        }
        Ok(())
    }
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Which policy drives an episode.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Eco(&'a EcoAgent, ActMode),
    Random,
}

/// Runs a full episode of a fresh environment built from `config` and `seed`.
pub fn run_episode(
    policy: Policy<'_>,
    config: &EnvironmentConfig,
    seed: u64,
) -> Result<Episode, AgentError> {
    let (mut env, mut obs) = Environment::reset(config, seed)?;
    let num_users = config.num_users;
    let num_providers = config.num_providers;
    let mut episode = Episode {
        seed,
        param_version: match policy {
            Policy::Eco(agent, _) => agent.version(),
            Policy::Random => 0,
        },
        num_users,
        num_providers,
        num_topics: config.num_topics,
        initial_satisfaction: env.initial_satisfaction().to_vec(),
        outcomes: Vec::with_capacity(config.horizon),
        snapshots: Vec::new(),
        events: Vec::new(),
    };
    let mut session = match policy {
        Policy::Eco(agent, _) => Some(ActSession::new(agent, num_users, num_providers)),
        Policy::Random => None,
    };
    while !env.is_done() && !obs.candidates.is_empty() {
        let (actions, mut step_events) = match (policy, &session) {
            (Policy::Eco(agent, mode), Some(session)) => {
                let snapshot = session.snapshot(&obs);
                let events = session.act(agent, &obs, &snapshot, seed, mode)?;
                episode.snapshots.push(snapshot);
                let mut actions = vec![None; num_users];
                for e in &events {
                    actions[e.user_id] = Some(e.doc_id);
                }
                (actions, events)
            }
            _ => {
                let actions = (0..num_users)
                    .map(|u| {
                        let mut rng =
                            RngStream::new(seed, Purpose::Action, u as u64, obs.step as u64);
                        random_action(&obs, &mut rng)
                    })
                    .collect();
                (actions, Vec::new())
            }
        };
        let topics: Vec<Option<usize>> = actions
            .iter()
            .map(|a| a.and_then(|id| env.document(id)).map(|d| d.topic))
            .collect();
        let (next, outcome) = env.step_partial(&actions)?;
        if let (Policy::Eco(agent, _), Some(session)) = (policy, session.as_mut()) {
            session.observe(agent, &outcome, &actions, &topics)?;
        }
        for e in &mut step_events {
            e.user_reward = outcome.user_rewards[e.user_id];
        }
        episode.events.extend(step_events);
        episode.outcomes.push(outcome);
        obs = next;
    }
    Ok(episode)
}
