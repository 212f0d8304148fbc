//! Training, evaluation and lambda sweeps.

use ecosim_agent::{ActMode, AgentConfig, AgentError, EcoAgent, Episode, Policy, UpdateStats};
use ecosim_core::{derive_seed, EnvironmentConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::metrics::RolloutMetrics;
use crate::scenario::{Scenario, ScenarioName};
use crate::stats::{pearson, spearman, MeanSe};

const TRAIN_TAG: u64 = 0x74_7261_696e;
const EVAL_TAG: u64 = 0x6576_616c;
const INIT_TAG: u64 = 0x696e_6974;

/// Maps `f` over `items` on up to `threads` threads (0 = one per core),
/// returning results in input order.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads == 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Seed of training environment `index` in `epoch`.
pub fn train_env_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    derive_seed(seed, &[TRAIN_TAG, epoch as u64, index as u64])
}

/// Seed of evaluation episode `index`; disjoint from training seeds.
pub fn eval_env_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[EVAL_TAG, index as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub envs_per_epoch: usize,
    pub seed: u64,
    /// Stop once the moving-average objective has not improved for this
    /// many epochs.
    pub plateau_epochs: Option<usize>,
    pub plateau_window: usize,
    pub constant_baseline: bool,
    pub threads: usize,
    /// Architecture and remaining agent settings; `lambda`, learning rates,
    /// baseline flag and seed are overwritten from the fields above.
    pub agent: AgentConfig,
}

impl TrainConfig {
    pub fn new(lambda: f64, learning_rate: f64, seed: u64) -> Self {
        TrainConfig {
            lambda,
            learning_rate,
            epochs: 300,
            envs_per_epoch: 10,
            seed,
            plateau_epochs: Some(30),
            plateau_window: 10,
            constant_baseline: false,
            threads: 1,
            agent: AgentConfig::default(),
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            lambda: self.lambda,
            actor_learning_rate: self.learning_rate,
            utility_learning_rate: self.learning_rate,
            constant_baseline: self.constant_baseline,
            seed: derive_seed(self.seed, &[INIT_TAG]),
            ..self.agent.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// (1 - lambda) * user reward + lambda * provider reward, averaged over
    /// the epoch's environments.
    pub objective: f64,
    pub user_reward: f64,
    pub provider_reward: f64,
    pub viable_providers: f64,
    pub stats: UpdateStats,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub agent: EcoAgent,
    pub curve: Vec<EpochRecord>,
    pub stopped_early_at: Option<usize>,
}

pub fn objective(lambda: f64, user_reward: f64, provider_reward: f64) -> f64 {
    (1.0 - lambda) * user_reward + lambda * provider_reward
}

fn collect_episodes(
    agent: &EcoAgent,
    config: &EnvironmentConfig,
    seeds: &[u64],
    mode: ActMode,
    threads: usize,
) -> Result<Vec<Episode>, AgentError> {
    par_map(seeds, threads, |&s| {
        ecosim_agent::run_episode(Policy::Eco(agent, mode), config, s)
    })
    .into_iter()
    .collect()
}

pub fn train(scenario: &Scenario, cfg: &TrainConfig) -> Result<TrainResult, HarnessError> {
    let env = &scenario.config;
    let mut agent = EcoAgent::new(cfg.agent_config(), env.num_topics)?;
    let mut curve: Vec<EpochRecord> = Vec::with_capacity(cfg.epochs);
    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stopped_early_at = None;
    let warmup = agent.config.actor_warmup_updates as usize;
    for epoch in 0..cfg.epochs {
        let seeds: Vec<u64> = (0..cfg.envs_per_epoch)
            .map(|i| train_env_seed(cfg.seed, epoch, i))
            .collect();
        let mut episodes = collect_episodes(&agent, env, &seeds, ActMode::Sample, cfg.threads)?;
        let n = episodes.len().max(1) as f64;
        let user_reward = episodes
            .iter()
            .map(|e| e.user_accumulated_reward())
            .sum::<f64>()
            / n;
        let provider_reward = episodes
            .iter()
            .map(|e| e.provider_accumulated_reward())
            .sum::<f64>()
            / n;
        let viable = episodes
            .iter()
            .map(|e| {
                let left: usize = e.outcomes.iter().map(|o| o.providers_left.len()).sum();
                (e.num_providers - left) as f64
            })
            .sum::<f64>()
            / n;
        let stats = match agent.reinforce_update(&mut episodes) {
            Ok(s) => s,
            Err(AgentError::NonFinite) => {
                return Err(HarnessError::Diverged {
                    epoch,
                    detail: format!(
                        "non-finite parameters after update (lambda {}, learning rate {})",
                        cfg.lambda, cfg.learning_rate
                    ),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let objective = objective(cfg.lambda, user_reward, provider_reward);
        log::debug!(
            "epoch {epoch}: objective {objective:.4} user {user_reward:.3} provider {provider_reward:.3} viable {viable:.2} losses {:.4}/{:.4}",
            stats.user_loss,
            stats.provider_loss
        );
        curve.push(EpochRecord {
            epoch,
            objective,
            user_reward,
            provider_reward,
            viable_providers: viable,
            stats,
        });
        if let Some(patience) = cfg.plateau_epochs {
            let w = cfg.plateau_window.max(1);
            // The policy is frozen during the actor warm-up; its objective
            // is noise and must not set the bar.
            if epoch >= warmup + w {
                let avg = curve[curve.len() - w..]
                    .iter()
                    .map(|r| r.objective)
                    .sum::<f64>()
                    / w as f64;
                if avg > best {
                    best = avg;
                    best_epoch = epoch;
                } else if epoch - best_epoch >= patience {
                    stopped_early_at = Some(epoch);
                    break;
                }
            }
        }
    }
    Ok(TrainResult {
        agent,
        curve,
        stopped_early_at,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum AgentChoice<'a> {
    Eco(&'a EcoAgent),
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub rollouts: usize,
    pub seed: u64,
    pub greedy: bool,
    pub threads: usize,
    /// Episodes whose (satisfaction, uplift) pairs are kept for scatter
    /// output; correlations use all episodes.
    pub scatter_episodes: usize,
}

impl EvalConfig {
    pub fn new(seed: u64) -> Self {
        EvalConfig {
            rollouts: 50,
            seed,
            greedy: false,
            threads: 1,
            scatter_episodes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub user_reward: MeanSe,
    pub provider_reward: MeanSe,
    pub user_reward_per_user: MeanSe,
    pub provider_reward_per_provider: MeanSe,
    pub viable_providers: MeanSe,
    pub rec_part: MeanSe,
    pub feedback_part: MeanSe,
    pub drift_part: MeanSe,
    pub group_rec_counts: Vec<MeanSe>,
    pub group_viable: Vec<MeanSe>,
    pub group_provider_reward: Vec<MeanSe>,
    pub viable_series: Vec<MeanSe>,
    pub uplift_pearson: Option<f64>,
    pub uplift_spearman: Option<f64>,
    pub scatter: Vec<(f64, f64)>,
    /// Per-episode metrics, without uplift pairs.
    pub episodes: Vec<RolloutMetrics>,
}

impl EvalSummary {
    pub fn objective(&self, lambda: f64) -> f64 {
        objective(lambda, self.user_reward.mean, self.provider_reward.mean)
    }

    pub fn from_metrics(mut metrics: Vec<RolloutMetrics>, scatter_episodes: usize) -> Self {
        let col = |f: &dyn Fn(&RolloutMetrics) -> f64| {
            MeanSe::of(&metrics.iter().map(f).collect::<Vec<_>>())
        };
        let cols = |len: usize, f: &dyn Fn(&RolloutMetrics, usize) -> f64| -> Vec<MeanSe> {
            (0..len)
                .map(|i| MeanSe::of(&metrics.iter().map(|m| f(m, i)).collect::<Vec<_>>()))
                .collect()
        };
        let groups = metrics.first().map_or(0, |m| m.group_rec_counts.len());
        let steps = metrics.first().map_or(0, |m| m.viable_series.len());
        let (sat, up): (Vec<f64>, Vec<f64>) = metrics
            .iter()
            .flat_map(|m| m.uplift_pairs.iter().copied())
            .unzip();
        let summary = EvalSummary {
            n: metrics.len(),
            user_reward: col(&|m| m.user_accumulated_reward),
            provider_reward: col(&|m| m.provider_accumulated_reward),
            user_reward_per_user: col(&|m| m.user_reward_per_user),
            provider_reward_per_provider: col(&|m| m.provider_reward_per_provider),
            viable_providers: col(&|m| m.viable_providers as f64),
            rec_part: col(&|m| m.rec_part),
            feedback_part: col(&|m| m.feedback_part),
            drift_part: col(&|m| m.drift_part),
            group_rec_counts: cols(groups, &|m, g| m.group_rec_counts[g]),
            group_viable: cols(groups, &|m, g| m.group_viable[g] as f64),
            group_provider_reward: cols(groups, &|m, g| m.group_provider_reward[g]),
            viable_series: cols(steps, &|m, t| m.viable_series[t] as f64),
            uplift_pearson: pearson(&sat, &up),
            uplift_spearman: spearman(&sat, &up),
            scatter: metrics
                .iter()
                .take(scatter_episodes)
                .flat_map(|m| m.uplift_pairs.iter().copied())
                .collect(),
            episodes: Vec::new(),
        };
        metrics.iter_mut().for_each(|m| m.uplift_pairs.clear());
        EvalSummary {
            episodes: metrics,
            ..summary
        }
    }
}

/// Runs `cfg.rollouts` fresh episodes and summarizes them.
pub fn evaluate(
    agent: AgentChoice<'_>,
    scenario: &Scenario,
    cfg: &EvalConfig,
) -> Result<EvalSummary, HarnessError> {
    let env = &scenario.config;
    let group_of = env.provider_group_of();
    let groups = scenario.num_groups();
    let seeds: Vec<u64> = (0..cfg.rollouts)
        .map(|i| eval_env_seed(cfg.seed, i))
        .collect();
    let mode = if cfg.greedy {
        ActMode::Greedy
    } else {
        ActMode::Sample
    };
    let metrics: Vec<RolloutMetrics> = par_map(
        &seeds,
        cfg.threads,
        |&s| -> Result<RolloutMetrics, HarnessError> {
            match agent {
                AgentChoice::Eco(a) => {
                    let ep = ecosim_agent::run_episode(Policy::Eco(a, mode), env, s)?;
                    RolloutMetrics::from_agent_episode(a, ep, env.horizon, &group_of, groups)
                }
                AgentChoice::Random => {
                    let ep = ecosim_agent::run_episode(Policy::Random, env, s)?;
                    Ok(RolloutMetrics::from_episode(
                        &ep,
                        env.horizon,
                        &group_of,
                        groups,
                    ))
                }
            }
        },
    )
    .into_iter()
    .collect::<Result<_, _>>()?;
    Ok(EvalSummary::from_metrics(metrics, cfg.scatter_episodes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub epochs: usize,
    pub envs_per_epoch: usize,
    pub rollouts: usize,
    pub seed: u64,
    pub greedy_eval: bool,
    pub constant_baseline: bool,
    pub plateau_epochs: Option<usize>,
    pub threads: usize,
    pub agent: AgentConfig,
}

impl SweepConfig {
    pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    pub const DEFAULT_LEARNING_RATES: [f64; 3] = [0.1, 0.03, 0.01];

    pub fn new(seed: u64) -> Self {
        SweepConfig {
            lambdas: Self::DEFAULT_LAMBDAS.to_vec(),
            learning_rates: Self::DEFAULT_LEARNING_RATES.to_vec(),
            epochs: 300,
            envs_per_epoch: 10,
            rollouts: 50,
            seed,
            greedy_eval: false,
            constant_baseline: false,
            plateau_epochs: Some(30),
            threads: 1,
            agent: AgentConfig::default(),
        }
    }

    pub fn train_config(&self, lambda: f64, learning_rate: f64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            envs_per_epoch: self.envs_per_epoch,
            plateau_epochs: self.plateau_epochs,
            constant_baseline: self.constant_baseline,
            threads: self.threads,
            agent: self.agent.clone(),
            ..TrainConfig::new(lambda, learning_rate, self.seed)
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            rollouts: self.rollouts,
            greedy: self.greedy_eval,
            threads: self.threads,
            ..EvalConfig::new(self.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub learning_rate: f64,
    pub objective: f64,
    pub epochs_run: usize,
    pub eval: EvalSummary,
    pub curve: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: ScenarioName,
    pub group_names: Vec<String>,
    pub entries: Vec<SweepEntry>,
    /// Index into `entries` of the selected model for each lambda, in grid
    /// order.
    pub selected: Vec<usize>,
    pub random: Option<EvalSummary>,
}

impl SweepResult {
    pub fn empty(scenario: &Scenario) -> Self {
        SweepResult {
            scenario: scenario.name,
            group_names: scenario
                .config
                .provider_groups
                .iter()
                .map(|g| g.name.clone())
                .collect(),
            entries: Vec::new(),
            selected: Vec::new(),
            random: None,
        }
    }

    pub fn selected_entries(&self) -> impl Iterator<Item = &SweepEntry> {
        self.selected.iter().map(|&i| &self.entries[i])
    }
}

/// Trains and evaluates every (lambda, learning rate) pair and keeps, per
/// lambda, the model with the best lambda-weighted evaluation objective.
/// All pairs share the training and evaluation seeds.
pub fn lambda_sweep(scenario: &Scenario, cfg: &SweepConfig) -> Result<SweepResult, HarnessError> {
    if cfg.lambdas.is_empty() {
        return Err(HarnessError::EmptyGrid("lambda"));
    }
    if cfg.learning_rates.is_empty() {
        return Err(HarnessError::EmptyGrid("learning rate"));
    }
    let mut result = SweepResult::empty(scenario);
    let eval_cfg = cfg.eval_config();
    for &lambda in &cfg.lambdas {
        let mut best: Option<usize> = None;
        for &lr in &cfg.learning_rates {
            log::info!("training lambda {lambda} lr {lr}");
            let trained = train(scenario, &cfg.train_config(lambda, lr))?;
            let eval = evaluate(AgentChoice::Eco(&trained.agent), scenario, &eval_cfg)?;
            let objective = eval.objective(lambda);
            log::info!(
                "lambda {lambda} lr {lr}: user {:.3} provider {:.3} viable {:.2}",
                eval.user_reward.mean,
                eval.provider_reward.mean,
                eval.viable_providers.mean
            );
            result.entries.push(SweepEntry {
                lambda,
                learning_rate: lr,
                objective,
                epochs_run: trained.curve.len(),
                eval,
                curve: trained.curve,
            });
            let idx = result.entries.len() - 1;
            if best.is_none_or(|b| objective > result.entries[b].objective) {
                best = Some(idx);
            }
        }
        result.selected.extend(best);
    }
    result.random = Some(evaluate(AgentChoice::Random, scenario, &eval_cfg)?);
    Ok(result)
}
