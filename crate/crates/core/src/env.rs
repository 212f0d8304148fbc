//! The episodic environment: `reset` samples a fresh ecosystem, `step`
//! applies one simultaneous round of recommendations.

use serde::{Deserialize, Serialize};

use crate::config::EnvironmentConfig;
use crate::dynamics::{
    create_document, provider_topic_distribution, update_provider, update_user, user_reward,
};
use crate::entities::{DocId, Document, ProviderId, ProviderState, UserId, UserState};
use crate::error::EnvError;
use crate::rng::{Purpose, RngStream};
use crate::sampling::sample_unit_preference;

/// What a user experienced at one past step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStepRecord {
    pub topic: usize,
    pub reward: f64,
}

/// What a provider experienced at one past step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderStepRecord {
    /// (topic, user reward) for each recommendation of this provider's
    /// content, in user order.
    pub recommended: Vec<(usize, f64)>,
    /// Number of documents the provider held when the step was taken.
    pub inventory_size: usize,
}

impl ProviderStepRecord {
    pub fn count(&self) -> usize {
        self.recommended.len()
    }

    pub fn sum_reward(&self) -> f64 {
        self.recommended.iter().map(|(_, r)| r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserObservation {
    pub id: UserId,
    pub history: Vec<UserStepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderObservation {
    pub id: ProviderId,
    pub history: Vec<ProviderStepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: DocId,
    pub topic: usize,
    pub provider_id: ProviderId,
}

/// The agent's view of the environment. Latent preferences, document
/// quality and provider satisfaction are not included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub num_topics: usize,
    pub users: Vec<UserObservation>,
    /// Viable providers only, in id order.
    pub providers: Vec<ProviderObservation>,
    /// Every document of every viable provider, in id order.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub doc_id: DocId,
    pub topic: usize,
    pub user_id: UserId,
    pub user_reward: f64,
}

/// One provider's transition within a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderStepOutcome {
    pub provider_id: ProviderId,
    pub group: usize,
    pub recommendations: Vec<Recommendation>,
    /// Documents held when the step began.
    pub inventory_size: usize,
    pub sum_user_reward: f64,
    /// The three additive parts of the raw feedback.
    pub drift_part: f64,
    pub exposure_part: f64,
    pub user_feedback_part: f64,
    pub feedback: f64,
    pub reward: f64,
    pub satisfaction: f64,
    pub left: bool,
}

impl ProviderStepOutcome {
    pub fn count(&self) -> usize {
        self.recommendations.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Index of the step that was executed.
    pub step: usize,
    /// Indexed by user id; zero for a user that received nothing.
    pub user_rewards: Vec<f64>,
    /// Every provider that was viable when the step began, in id order.
    pub providers: Vec<ProviderStepOutcome>,
    pub providers_left: Vec<ProviderId>,
    pub new_documents: Vec<Document>,
    pub done: bool,
}

impl StepOutcome {
    pub fn provider(&self, id: ProviderId) -> Option<&ProviderStepOutcome> {
        self.providers.iter().find(|p| p.provider_id == id)
    }
}

/// One running episode. Owns all of its state; distinct environments share
/// nothing and can be stepped on different threads.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvironmentConfig,
    seed: u64,
    step: usize,
    users: Vec<UserState>,
    providers: Vec<ProviderState>,
    /// Every document ever created; a document's id is its index.
    documents: Vec<Document>,
    candidates: Vec<DocId>,
    user_history: Vec<Vec<UserStepRecord>>,
    provider_history: Vec<Vec<ProviderStepRecord>>,
    initial_satisfaction: Vec<f64>,
    done: bool,
}

impl Environment {
    pub fn reset(config: &EnvironmentConfig, seed: u64) -> Result<(Self, Observation), EnvError> {
        config.validate()?;
        let k = config.num_topics;
        let up = &config.user_params;
        let users: Vec<UserState> = (0..config.num_users)
            .map(|id| {
                let mut rng = RngStream::new(seed, Purpose::UserInit, id as u64, 0);
                let preference = sample_unit_preference(&mut rng, k)?;
                Ok(UserState {
                    id,
                    preference,
                    quality_sensitivity: rng
                        .uniform_range(up.quality_sensitivity.lo, up.quality_sensitivity.hi),
                    preference_drift: rng
                        .uniform_range(up.preference_drift.lo, up.preference_drift.hi),
                })
            })
            .collect::<Result<_, EnvError>>()?;

        let mut providers = Vec::with_capacity(config.num_providers);
        let mut documents = Vec::new();
        for (id, group) in config.provider_group_of().into_iter().enumerate() {
            let g = &config.provider_groups[group];
            let mut rng = RngStream::new(seed, Purpose::ProviderInit, id as u64, 0);
            let preference = sample_unit_preference(&mut rng, k)?;
            let mut satisfaction_fn = g.satisfaction_fn;
            satisfaction_fn.offset_x0 += rng.uniform_range(0.0, g.offset_x0_spread);
            let mut p = ProviderState {
                id,
                group,
                preference,
                accumulated_feedback: 0.0,
                satisfaction: satisfaction_fn.value(0.0),
                no_rec_drift: g.no_rec_drift,
                exposure_sensitivity: g.exposure_sensitivity,
                feedback_sensitivity: g.feedback_sensitivity,
                preference_drift: g.preference_drift,
                satisfaction_fn,
                viability_threshold: g.viability_threshold,
                documents: Vec::new(),
                creation_rate: g.creation_rate,
                quality_mean: g.quality_mean,
                quality_std: g.quality_std,
                viable: true,
            };
            let dist = provider_topic_distribution(&p);
            let mut doc_rng = RngStream::new(seed, Purpose::InitialDocuments, id as u64, 0);
            for _ in 0..config.initial_docs_per_provider {
                let doc = create_document(&p, &dist, &mut doc_rng, documents.len() as DocId, 0);
                p.documents.push(doc.id);
                documents.push(doc);
            }
            providers.push(p);
        }

        let candidates = documents.iter().map(|d| d.id).collect();
        let initial_satisfaction = providers.iter().map(|p| p.satisfaction).collect();
        let env = Environment {
            config: config.clone(),
            seed,
            step: 0,
            user_history: vec![Vec::new(); users.len()],
            provider_history: vec![Vec::new(); providers.len()],
            users,
            providers,
            documents,
            candidates,
            initial_satisfaction,
            done: false,
        };
        let obs = env.observation();
        Ok((env, obs))
    }

    /// Recommends `actions[u]` to user `u`, for every user.
    pub fn step(&mut self, actions: &[DocId]) -> Result<(Observation, StepOutcome), EnvError> {
        let wrapped: Vec<Option<DocId>> = actions.iter().copied().map(Some).collect();
        self.step_partial(&wrapped)
    }

    /// Like [`Environment::step`], but a `None` action leaves that user
    /// without a recommendation this step. Used to probe counterfactual
    /// branches.
    pub fn step_partial(
        &mut self,
        actions: &[Option<DocId>],
    ) -> Result<(Observation, StepOutcome), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if actions.len() != self.users.len() {
            return Err(EnvError::ActionCount {
                expected: self.users.len(),
                got: actions.len(),
            });
        }
        for &id in actions.iter().flatten() {
            if !self.is_candidate(id) {
                return Err(EnvError::InvalidAction(id));
            }
        }

        let t = self.step;
        let k = self.config.num_topics;
        // All user rewards come from the pre-step states.
        let mut user_rewards = vec![0.0; self.users.len()];
        let mut per_provider: Vec<Vec<Recommendation>> = vec![Vec::new(); self.providers.len()];
        for (uid, action) in actions.iter().enumerate() {
            if let Some(doc_id) = *action {
                let doc = &self.documents[doc_id as usize];
                let r = user_reward(&self.users[uid], doc);
                user_rewards[uid] = r;
                per_provider[doc.provider_id].push(Recommendation {
                    doc_id,
                    topic: doc.topic,
                    user_id: uid,
                    user_reward: r,
                });
            }
        }
        for (uid, action) in actions.iter().enumerate() {
            if let Some(doc_id) = *action {
                let doc = &self.documents[doc_id as usize];
                update_user(&mut self.users[uid], doc, user_rewards[uid]);
                self.user_history[uid].push(UserStepRecord {
                    topic: doc.topic,
                    reward: user_rewards[uid],
                });
            }
        }

        let mut next_doc_id = self.documents.len() as DocId;
        let mut providers_out = Vec::new();
        let mut providers_left = Vec::new();
        let mut new_documents = Vec::new();
        for (pid, recs) in per_provider.into_iter().enumerate() {
            let provider = &mut self.providers[pid];
            if !provider.viable {
                continue;
            }
            let inventory_size = provider.documents.len();
            let pairs: Vec<(&Document, f64)> = recs
                .iter()
                .map(|r| (&self.documents[r.doc_id as usize], r.user_reward))
                .collect();
            let mut rng = RngStream::new(self.seed, Purpose::ContentCreation, pid as u64, t as u64);
            let update = update_provider(provider, &pairs, &mut rng, &mut next_doc_id, t)?;
            let sum_user_reward: f64 = recs.iter().map(|r| r.user_reward).sum();
            self.provider_history[pid].push(ProviderStepRecord {
                recommended: pairs.iter().map(|(d, r)| (d.topic, *r)).collect(),
                inventory_size,
            });
            if update.left {
                providers_left.push(pid);
            }
            providers_out.push(ProviderStepOutcome {
                provider_id: pid,
                group: provider.group,
                sum_user_reward,
                drift_part: provider.no_rec_drift,
                exposure_part: provider.exposure_sensitivity * recs.len() as f64,
                user_feedback_part: provider.feedback_sensitivity * sum_user_reward,
                recommendations: recs,
                inventory_size,
                feedback: update.feedback,
                reward: update.reward,
                satisfaction: provider.satisfaction,
                left: update.left,
            });
            new_documents.extend(update.new_documents);
        }
        debug_assert!(new_documents.iter().all(|d| d.topic < k));
        self.documents.extend(new_documents.iter().cloned());
        let providers = &self.providers;
        let documents = &self.documents;
        self.candidates = documents
            .iter()
            .filter(|d| providers[d.provider_id].viable)
            .map(|d| d.id)
            .collect();

        self.step += 1;
        self.done = self.step >= self.config.horizon || self.num_viable() == 0;
        let outcome = StepOutcome {
            step: t,
            user_rewards,
            providers: providers_out,
            providers_left,
            new_documents,
            done: self.done,
        };
        Ok((self.observation(), outcome))
    }

    fn is_candidate(&self, id: DocId) -> bool {
        self.documents
            .get(id as usize)
            .is_some_and(|d| self.providers[d.provider_id].viable)
    }

    pub fn observation(&self) -> Observation {
        Observation {
            step: self.step,
            num_topics: self.config.num_topics,
            users: self
                .user_history
                .iter()
                .enumerate()
                .map(|(id, h)| UserObservation {
                    id,
                    history: h.clone(),
                })
                .collect(),
            providers: self
                .providers
                .iter()
                .filter(|p| p.viable)
                .map(|p| ProviderObservation {
                    id: p.id,
                    history: self.provider_history[p.id].clone(),
                })
                .collect(),
            candidates: self
                .candidates
                .iter()
                .map(|&id| {
                    let d = &self.documents[id as usize];
                    Candidate {
                        doc_id: id,
                        topic: d.topic,
                        provider_id: d.provider_id,
                    }
                })
                .collect(),
        }
    }

    pub fn config(&self) -> &EnvironmentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn current_step(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn providers(&self) -> &[ProviderState] {
        &self.providers
    }

    pub fn document(&self, id: DocId) -> Option<&Document> {
        self.documents.get(id as usize)
    }

    pub fn candidates(&self) -> &[DocId] {
        &self.candidates
    }

    pub fn num_viable(&self) -> usize {
        self.providers.iter().filter(|p| p.viable).count()
    }

    /// Satisfaction of each provider right after reset, by provider id.
    pub fn initial_satisfaction(&self) -> &[f64] {
        &self.initial_satisfaction
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::small_config;
    use crate::satisfaction::SatisfactionFn;

    #[test]
    fn reset_builds_candidate_set() {
        let cfg = small_config();
        let (env, obs) = Environment::reset(&cfg, 3).unwrap();
        assert_eq!(obs.candidates.len(), 6);
        assert_eq!(obs.users.len(), 4);
        assert_eq!(obs.providers.len(), 2);
        assert_eq!(env.current_step(), 0);
        for p in env.providers() {
            assert_eq!(p.satisfaction, p.satisfaction_fn.value(0.0));
            assert_eq!(p.documents.len(), 3);
        }
        for u in env.users() {
            assert!((u.preference.norm() - 1.0).abs() < 1e-12);
            assert!((0.2..=0.5).contains(&u.quality_sensitivity));
        }
    }

    #[test]
    fn reset_rejects_empty_inventory() {
        let mut cfg = small_config();
        cfg.num_providers = 1;
        cfg.provider_groups[0].size = 1;
        cfg.initial_docs_per_provider = 0;
        assert!(matches!(
            Environment::reset(&cfg, 0),
            Err(EnvError::Config(_))
        ));
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = small_config();
        let (_, a) = Environment::reset(&cfg, 9).unwrap();
        let (_, b) = Environment::reset(&cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_action_names_the_id() {
        let (mut env, _) = Environment::reset(&small_config(), 0).unwrap();
        let err = env.step(&[0, 1, 2, 999]).unwrap_err();
        assert_eq!(err, EnvError::InvalidAction(999));
        assert!(err.to_string().contains("999"));
    }

    #[test]
    fn horizon_one_finishes_after_one_step() {
        let mut cfg = small_config();
        cfg.horizon = 1;
        let (mut env, _) = Environment::reset(&cfg, 0).unwrap();
        let (_, out) = env.step(&[0, 0, 0, 0]).unwrap();
        assert!(out.done);
        assert_eq!(env.step(&[0, 0, 0, 0]), Err(EnvError::EpisodeDone));
    }

    #[test]
    fn everyone_below_threshold_leaves_at_once() {
        let mut cfg = small_config();
        cfg.provider_groups[0].satisfaction_fn = SatisfactionFn::linear(1.0, 0.0);
        cfg.provider_groups[0].offset_x0_spread = 0.0;
        cfg.provider_groups[0].viability_threshold = 5.0;
        let (mut env, _) = Environment::reset(&cfg, 0).unwrap();
        let (obs, out) = env.step(&[0, 0, 0, 0]).unwrap();
        assert!(out.done);
        assert_eq!(out.providers_left, vec![0, 1]);
        assert!(obs.candidates.is_empty());
        assert!(obs.providers.is_empty());
    }

    #[test]
    fn unrecommended_provider_gets_pure_drift() {
        let mut cfg = small_config();
        cfg.num_users = 2;
        let (mut env, obs) = Environment::reset(&cfg, 0).unwrap();
        let a_doc = obs
            .candidates
            .iter()
            .find(|c| c.provider_id == 0)
            .unwrap()
            .doc_id;
        let (_, out) = env.step(&[a_doc, a_doc]).unwrap();
        let a = out.provider(0).unwrap();
        let b = out.provider(1).unwrap();
        assert_eq!(a.count(), 2);
        assert_eq!(b.count(), 0);
        assert_eq!(b.feedback, cfg.provider_groups[0].no_rec_drift);
    }

    #[test]
    fn departed_documents_never_return() {
        let mut cfg = small_config();
        cfg.horizon = 10;
        cfg.provider_groups[0].offset_x0_spread = 0.0;
        cfg.provider_groups[0].satisfaction_fn = SatisfactionFn::linear(1.0, 0.35);
        let (mut env, mut obs) = Environment::reset(&cfg, 1).unwrap();
        let mut gone: Vec<ProviderId> = Vec::new();
        while !env.is_done() {
            // Always recommend provider 0 when it is still around.
            let pick = obs
                .candidates
                .iter()
                .find(|c| c.provider_id == 0)
                .unwrap_or(&obs.candidates[0])
                .doc_id;
            let (next, out) = env.step(&vec![pick; cfg.num_users]).unwrap();
            gone.extend(out.providers_left);
            for c in &next.candidates {
                assert!(!gone.contains(&c.provider_id));
            }
            obs = next;
        }
        assert!(gone.contains(&1));
    }
}
