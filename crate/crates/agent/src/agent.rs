//! The provider-aware REINFORCE agent: user and provider utility models, the
//! two-tower actor, and the epoch update that ties them together.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ecosim_core::{discounted_return, Purpose, RngStream};
use ecosim_kernel::{AdagradState, Checkpoint, Parameterized};
use serde::{Deserialize, Serialize};

use crate::actor::{Actor, ActorSample, CandidateSnapshot};
use crate::error::AgentError;
use crate::features::{topic_one_hot, user_step_input, ProviderStepFeature};
use crate::rollout::Episode;
use crate::utility::{UtilityModel, UtilitySequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Weight of provider uplift against user return, in [0, 1].
    pub lambda: f64,
    pub temperature: f64,
    pub hidden_dim: usize,
    pub head_widths: Vec<usize>,
    pub tower_widths: Vec<usize>,
    pub user_discount: f64,
    pub provider_discount: f64,
    pub actor_learning_rate: f64,
    pub utility_learning_rate: f64,
    pub huber_delta: f64,
    /// Starting value of every Adagrad accumulator.
    pub adagrad_initial_accumulator: f64,
    /// Subtract the batch-mean reward before the actor step. Off by default.
    pub constant_baseline: bool,
    /// Updates that train only the utility models, leaving the actor
    /// untouched. Uplift estimates from a barely trained provider model are
    /// noise, and one early Adagrad step on them can push the policy into a
    /// corner it never leaves.
    #[serde(default)]
    pub actor_warmup_updates: u64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            lambda: 0.0,
            temperature: 1.0,
            hidden_dim: 32,
            head_widths: vec![32, 32, 16],
            tower_widths: vec![32, 32, 32],
            user_discount: 0.99,
            provider_discount: 0.99,
            actor_learning_rate: 0.03,
            utility_learning_rate: 0.03,
            huber_delta: 1.0,
            adagrad_initial_accumulator: 0.0,
            constant_baseline: false,
            actor_warmup_updates: 10,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(AgentError::BadLambda(self.lambda));
        }
        let bad = |what: &str| {
            Err(AgentError::Checkpoint(format!(
                "invalid agent config: {what}"
            )))
        };
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.hidden_dim == 0 || self.tower_widths.is_empty() || self.tower_widths.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.head_widths.contains(&0) {
            return bad("layer widths must be positive");
        }
        if [self.actor_learning_rate, self.utility_learning_rate]
            .iter()
            .any(|r| r.is_nan() || *r < 0.0)
        {
            return bad("learning rates must be non-negative");
        }
        if self.adagrad_initial_accumulator.is_nan() || self.adagrad_initial_accumulator < 0.0 {
            return bad("adagrad_initial_accumulator must be non-negative");
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return bad("huber_delta must be positive");
        }
        Ok(())
    }
}

/// Summary of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub num_events: usize,
    /// Utility-model losses before the update.
    pub user_loss: f64,
    pub provider_loss: f64,
    pub actor_loss: f64,
    /// Root mean square of the actor gradient entries.
    pub actor_grad_rms: f64,
    pub mean_user_return: f64,
    pub mean_uplift: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    num_topics: usize,
    version: u64,
    config: AgentConfig,
}

#[derive(Debug, Clone)]
pub struct EcoAgent {
    pub config: AgentConfig,
    num_topics: usize,
    pub user_model: UtilityModel,
    pub provider_model: UtilityModel,
    pub actor: Actor,
    user_opt: AdagradState,
    provider_opt: AdagradState,
    actor_opt: AdagradState,
    version: u64,
}

/// Prepared regression data for one episode.
struct EpisodeSequences {
    users: Vec<UtilitySequence>,
    providers: Vec<UtilitySequence>,
}

impl EcoAgent {
    pub fn new(config: AgentConfig, num_topics: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let mut rng = RngStream::new(config.seed, Purpose::ParameterInit, 0, 0);
        let h = config.hidden_dim;
        let user_model =
            UtilityModel::new(num_topics + 1, num_topics, h, &config.head_widths, &mut rng);
        let provider_model = UtilityModel::new(
            num_topics + 3,
            num_topics + 3,
            h,
            &config.head_widths,
            &mut rng,
        );
        let actor = Actor::new(
            h,
            num_topics + h,
            &config.tower_widths,
            config.temperature,
            &mut rng,
        );
        let acc0 = config.adagrad_initial_accumulator;
        Ok(EcoAgent {
            user_opt: AdagradState::for_model(&user_model, config.utility_learning_rate)
                .with_initial_accumulator(acc0),
            provider_opt: AdagradState::for_model(&provider_model, config.utility_learning_rate)
                .with_initial_accumulator(acc0),
            actor_opt: AdagradState::for_model(&actor, config.actor_learning_rate)
                .with_initial_accumulator(acc0),
            config,
            num_topics,
            user_model,
            provider_model,
            actor,
            version: 0,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    /// Number of updates applied so far. Episodes remember the version they
    /// were collected under.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn all_finite(&self) -> bool {
        self.user_model.all_finite() && self.provider_model.all_finite() && self.actor.all_finite()
    }

    /// Factual and counterfactual utility of step `t` of a provider
    /// history: the model's prediction for the step as it happened and for
    /// `counterfactual` in its place, from the same encoded past.
    pub fn counterfactual_uplift(
        &self,
        history: &[ProviderStepFeature],
        t: usize,
        counterfactual: &ProviderStepFeature,
    ) -> Result<(f64, f64), AgentError> {
        let past: Vec<Vec<f64>> = history[..t].iter().map(|f| f.to_input()).collect();
        let state = self.provider_model.encode(&past)?;
        let factual = self
            .provider_model
            .predict(&state, &history[t].to_input())?;
        let cf = self
            .provider_model
            .predict(&state, &counterfactual.to_input())?;
        Ok((factual, cf))
    }

    fn check_version(&self, episodes: &[Episode]) -> Result<(), AgentError> {
        for e in episodes {
            if e.param_version != self.version {
                return Err(AgentError::StaleEpisodes {
                    expected: self.version,
                    got: e.param_version,
                });
            }
        }
        Ok(())
    }

    /// Builds regression sequences and fills each event's realized return.
    fn sequences(&self, episode: &mut Episode) -> EpisodeSequences {
        let k = self.num_topics;
        let mut users = vec![UtilitySequence::default(); episode.num_users];
        let mut rewards = vec![Vec::new(); episode.num_users];
        let mut owner = vec![Vec::new(); episode.num_users];
        for (i, e) in episode.events.iter().enumerate() {
            let topic = episode.snapshots[e.snapshot].groups[e.chosen_group].topic;
            let s = &mut users[e.user_id];
            s.inputs.push(user_step_input(topic, e.user_reward, k));
            s.actions.push(topic_one_hot(topic, k));
            rewards[e.user_id].push(e.user_reward);
            owner[e.user_id].push(i);
        }
        for (u, s) in users.iter_mut().enumerate() {
            s.targets = discounted_return(&rewards[u], self.config.user_discount);
            for (&i, &q) in owner[u].iter().zip(&s.targets) {
                episode.events[i].user_return = Some(q);
            }
        }
        let providers = (0..episode.num_providers)
            .map(|p| {
                let steps = episode.provider_steps(p);
                let inputs: Vec<Vec<f64>> = steps.iter().map(|(f, _)| f.to_input()).collect();
                let r: Vec<f64> = steps.iter().map(|(_, r)| *r).collect();
                UtilitySequence {
                    actions: inputs.clone(),
                    inputs,
                    targets: discounted_return(&r, self.config.provider_discount),
                }
            })
            .collect();
        EpisodeSequences {
            users: users.into_iter().filter(|s| !s.is_empty()).collect(),
            providers,
        }
    }

    /// Fills factual and counterfactual provider utilities for every event
    /// using the current provider model.
    pub fn fill_uplifts(&self, episode: &mut Episode) -> Result<(), AgentError> {
        let k = self.num_topics;
        let index: HashMap<(usize, usize), usize> = episode
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.step, e.user_id), i))
            .collect();
        for p in 0..episode.num_providers {
            let steps = episode.provider_steps(p);
            if steps.is_empty() {
                continue;
            }
            let inputs: Vec<Vec<f64>> = steps.iter().map(|(f, _)| f.to_input()).collect();
            let states = self.provider_model.states(&inputs)?;
            for (t, outcome) in episode.outcomes.iter().enumerate() {
                let Some(po) = outcome.provider(p) else {
                    continue;
                };
                let factual = self.provider_model.predict(&states[t], &inputs[t])?;
                for (i, rec) in po.recommendations.iter().enumerate() {
                    let Some(&ev) = index.get(&(t, rec.user_id)) else {
                        continue;
                    };
                    let cf_feature =
                        ProviderStepFeature::without(&po.recommendations, i, po.inventory_size, k);
                    let cf = self
                        .provider_model
                        .predict(&states[t], &cf_feature.to_input())?;
                    let e = &mut episode.events[ev];
                    e.factual_utility = Some(factual);
                    e.counterfactual_utility = Some(cf);
                }
            }
        }
        Ok(())
    }

    /// Per-event actor rewards `(1 - lambda) Q^u + lambda * uplift`, with the
    /// optional batch-mean baseline removed. Events must have their returns
    /// and uplifts filled.
    pub fn event_rewards(&self, episodes: &[Episode]) -> Vec<f64> {
        let lambda = self.config.lambda;
        let mut r: Vec<f64> = episodes
            .iter()
            .flat_map(|e| e.events.iter())
            .map(|e| {
                (1.0 - lambda) * e.user_return.unwrap_or(0.0) + lambda * e.uplift().unwrap_or(0.0)
            })
            .collect();
        if self.config.constant_baseline && !r.is_empty() {
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            r.iter_mut().for_each(|x| *x -= mean);
        }
        r
    }

    /// Surrogate actor loss and gradient over all events of `episodes`.
    pub fn actor_gradient(&self, episodes: &[Episode]) -> Result<(f64, Actor), AgentError> {
        let rewards = self.event_rewards(episodes);
        let mut snapshots: Vec<&CandidateSnapshot> = Vec::new();
        let mut samples = Vec::with_capacity(rewards.len());
        let mut r = rewards.into_iter();
        for ep in episodes {
            let offset = snapshots.len();
            snapshots.extend(ep.snapshots.iter());
            for e in &ep.events {
                samples.push(ActorSample {
                    snapshot: offset + e.snapshot,
                    user_state: e.user_state.clone(),
                    chosen_group: e.chosen_group,
                    reward: r.next().unwrap_or(0.0),
                });
            }
        }
        Ok(self.actor.reinforce_loss_and_grad(&samples, &snapshots)?)
    }

    /// One epoch update from on-policy episodes: regress both utility models
    /// onto realized returns (one Adagrad step per episode), recompute the
    /// uplifts with the refreshed provider model, then take one actor step.
    pub fn reinforce_update(
        &mut self,
        episodes: &mut [Episode],
    ) -> Result<UpdateStats, AgentError> {
        self.check_version(episodes)?;
        let delta = self.config.huber_delta;
        let seqs: Vec<EpisodeSequences> = episodes.iter_mut().map(|e| self.sequences(e)).collect();
        let mut stats = UpdateStats::default();
        for s in &seqs {
            let (lu, gu) = self.user_model.loss_and_grad(&s.users, delta)?;
            self.user_opt.step(&mut self.user_model, &gu)?;
            let (lp, gp) = self.provider_model.loss_and_grad(&s.providers, delta)?;
            self.provider_opt.step(&mut self.provider_model, &gp)?;
            stats.user_loss += lu / seqs.len() as f64;
            stats.provider_loss += lp / seqs.len() as f64;
        }
        for e in episodes.iter_mut() {
            self.fill_uplifts(e)?;
        }
        let events = || episodes.iter().flat_map(|e| e.events.iter());
        stats.num_events = events().count();
        if stats.num_events > 0 {
            let n = stats.num_events as f64;
            stats.mean_user_return = events().filter_map(|e| e.user_return).sum::<f64>() / n;
            stats.mean_uplift = events().filter_map(|e| e.uplift()).sum::<f64>() / n;
            stats.mean_reward = self.event_rewards(episodes).iter().sum::<f64>() / n;
        }
        if self.version >= self.config.actor_warmup_updates {
            let (loss, grads) = self.actor_gradient(episodes)?;
            stats.actor_loss = loss;
            let g = grads.flatten();
            stats.actor_grad_rms =
                (g.iter().map(|x| x * x).sum::<f64>() / g.len().max(1) as f64).sqrt();
            self.actor_opt.step(&mut self.actor, &grads)?;
        }
        if !self.all_finite() {
            return Err(AgentError::NonFinite);
        }
        self.version += 1;
        Ok(stats)
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Writes parameters to `path` and the configuration to a `.json`
    /// sidecar next to it.
    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut ck = Checkpoint::from_model("user_model", &self.user_model);
        ck.append("provider_model", &self.provider_model);
        ck.append("actor", &self.actor);
        std::fs::write(path, ck.to_bytes())?;
        let sidecar = Sidecar {
            num_topics: self.num_topics,
            version: self.version,
            config: self.config.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        std::fs::write(Self::sidecar_path(path), json)?;
        Ok(())
    }

    /// Loads a saved agent. When `lambda` is given it must match the value
    /// the agent was trained with.
    pub fn load(path: &Path, lambda: Option<f64>) -> Result<Self, AgentError> {
        let json = std::fs::read_to_string(Self::sidecar_path(path))?;
        let sidecar: Sidecar =
            serde_json::from_str(&json).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        if let Some(requested) = lambda {
            if (requested - sidecar.config.lambda).abs() > 1e-12 {
                return Err(AgentError::LambdaMismatch {
                    stored: sidecar.config.lambda,
                    requested,
                });
            }
        }
        let mut agent = EcoAgent::new(sidecar.config, sidecar.num_topics)?;
        let ck = Checkpoint::from_bytes(&std::fs::read(path)?)?;
        ck.load_into("user_model", &mut agent.user_model)?;
        ck.load_into("provider_model", &mut agent.provider_model)?;
        ck.load_into("actor", &mut agent.actor)?;
        agent.version = sidecar.version;
        Ok(agent)
    }
}
