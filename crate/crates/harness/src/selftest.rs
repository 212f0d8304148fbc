//! Self-checks that need no training: gradient checks on the agent's
//! models, Monte-Carlo checks of the policy-gradient estimator, and a
//! brute-force check that a recommendation's effect on provider utility is
//! confined to the recommended provider.

use ecosim_agent::{Actor, ActorSample, AgentConfig, CandidateSnapshot, EcoAgent, UtilitySequence};
use ecosim_core::{
    DocId, Environment, EnvironmentConfig, ProviderGroupConfig, Purpose, RngStream, SatisfactionFn,
    UniformRange, UserParamConfig,
};
use ecosim_kernel::{finite_difference_check, Parameterized};

use crate::error::HarnessError;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn sequences(rng: &mut RngStream, input_dim: usize, action_dim: usize) -> Vec<UtilitySequence> {
    let v = |rng: &mut RngStream, n: usize| {
        (0..n)
            .map(|_| rng.uniform_range(-1.0, 1.0))
            .collect::<Vec<_>>()
    };
    (0..3)
        .map(|i| {
            let len = 2 + i;
            UtilitySequence {
                inputs: (0..len).map(|_| v(rng, input_dim)).collect(),
                actions: (0..len).map(|_| v(rng, action_dim)).collect(),
                // Small targets keep the loss, and so its roundoff, well
                // below the checker's denominator floor.
                targets: (0..len).map(|_| rng.uniform_range(-0.03, 0.03)).collect(),
            }
        })
        .collect()
}

/// Largest relative error of each model's analytic gradient against central
/// differences, for a default-sized agent initialized from `seed`:
/// (user model, provider model, actor).
pub fn gradient_errors(seed: u64, num_topics: usize) -> Result<[f64; 3], HarnessError> {
    let config = AgentConfig {
        seed,
        ..AgentConfig::default()
    };
    let h = config.hidden_dim;
    let agent = EcoAgent::new(config, num_topics)?;
    let k = num_topics;
    let mut rng = RngStream::new(seed, Purpose::Test, 0, 0);
    let delta = 0.01;

    let user_seqs = sequences(&mut rng, k + 1, k);
    let user = finite_difference_check(
        &agent.user_model,
        |m| m.loss_and_grad(&user_seqs, delta).expect("shapes"),
        FD_STEP,
    );
    let prov_seqs = sequences(&mut rng, k + 3, k + 3);
    let prov = finite_difference_check(
        &agent.provider_model,
        |m| m.loss_and_grad(&prov_seqs, delta).expect("shapes"),
        FD_STEP,
    );

    let states: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..h).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
        .collect();
    let snaps = [
        CandidateSnapshot::build(
            k,
            [
                (0, 0, 0),
                (1, 1 % k, 0),
                (2, 1 % k, 1),
                (3, 2 % k, 2),
                (4, 1 % k, 1),
            ]
            .iter()
            .map(|&(d, t, p)| (d as DocId, t, p, states[p].as_slice())),
        ),
        CandidateSnapshot::build(
            k,
            [(5, 2 % k, 3), (6, 0, 1)]
                .iter()
                .map(|&(d, t, p)| (d as DocId, t, p, states[p].as_slice())),
        ),
    ];
    let snap_refs: Vec<&CandidateSnapshot> = snaps.iter().collect();
    let samples: Vec<ActorSample> = (0..6)
        .map(|i| ActorSample {
            snapshot: i % 2,
            user_state: (0..h).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            chosen_group: if i % 2 == 0 {
                i % snaps[0].groups.len()
            } else {
                i % snaps[1].groups.len()
            },
            reward: rng.uniform_range(-0.02, 0.02),
        })
        .collect();
    let actor = finite_difference_check(
        &agent.actor,
        |m| {
            m.reinforce_loss_and_grad(&samples, &snap_refs)
                .expect("shapes")
        },
        FD_STEP,
    );
    Ok([
        user.max_relative_error,
        prov.max_relative_error,
        actor.max_relative_error,
    ])
}

/// A one-step bandit: three documents from three providers, a fixed user
/// state and fixed per-action rewards.
pub struct Bandit {
    pub actor: Actor,
    pub snapshot: CandidateSnapshot,
    pub user_state: Vec<f64>,
    pub rewards: [f64; 3],
}

impl Bandit {
    pub fn new(seed: u64) -> Bandit {
        let mut rng = RngStream::new(seed, Purpose::Test, 1, 0);
        let (h, k) = (4, 3);
        let actor = Actor::new(h, k + h, &[8, 8], 1.0, &mut rng);
        let states: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..h).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
            .collect();
        let snapshot =
            CandidateSnapshot::build(k, (0..3).map(|p| (p as DocId, p, p, states[p].as_slice())));
        Bandit {
            actor,
            snapshot,
            user_state: (0..h).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            rewards: [1.0, -0.5, 0.25],
        }
    }

    pub fn probabilities(&self, actor: &Actor) -> Vec<f64> {
        actor
            .doc_probabilities(&self.user_state, &self.snapshot)
            .expect("shapes")
    }

    /// Expected reward under `actor`.
    pub fn value(&self, actor: &Actor) -> f64 {
        self.probabilities(actor)
            .iter()
            .zip(self.rewards)
            .map(|(p, r)| p * r)
            .sum()
    }

    /// Gradient of the expected reward by central differences on
    /// [`Bandit::value`], independent of any backpropagation code.
    pub fn true_gradient(&self) -> Vec<f64> {
        let base = self.actor.flatten();
        let mut probe = self.actor.clone();
        let mut flat = base.clone();
        let h = 1e-6;
        (0..base.len())
            .map(|i| {
                flat[i] = base[i] + h;
                probe.assign_flat(&flat);
                let plus = self.value(&probe);
                flat[i] = base[i] - h;
                probe.assign_flat(&flat);
                let minus = self.value(&probe);
                flat[i] = base[i];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// Actions drawn from the policy.
    pub fn sample_actions(&self, n: usize, seed: u64) -> Vec<usize> {
        let probs = self.probabilities(&self.actor);
        let mut rng = RngStream::new(seed, Purpose::Action, 0, 0);
        (0..n).map(|_| rng.categorical(&probs)).collect()
    }

    /// The implemented estimator: negated gradient of the REINFORCE loss
    /// over the sampled actions, each with its reward plus `shift`.
    pub fn estimate(&self, actions: &[usize], shift: f64) -> Vec<f64> {
        let samples: Vec<ActorSample> = actions
            .iter()
            .map(|&a| ActorSample {
                snapshot: 0,
                user_state: self.user_state.clone(),
                chosen_group: a,
                reward: self.rewards[a] + shift,
            })
            .collect();
        let (_, g) = self
            .actor
            .reinforce_loss_and_grad(&samples, &[&self.snapshot])
            .expect("shapes");
        g.flatten().into_iter().map(|x| -x).collect()
    }

    /// Score vector (gradient of the log-probability) of each action.
    pub fn scores(&self) -> Vec<Vec<f64>> {
        (0..3)
            .map(|a| {
                let s = ActorSample {
                    snapshot: 0,
                    user_state: self.user_state.clone(),
                    chosen_group: a,
                    reward: 1.0,
                };
                let (_, g) = self
                    .actor
                    .reinforce_loss_and_grad(&[s], &[&self.snapshot])
                    .expect("shapes");
                g.flatten().into_iter().map(|x| -x).collect()
            })
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative error `|estimate - truth| / |truth|` of the REINFORCE gradient
/// averaged over `n` sampled actions.
pub fn score_function_error(seed: u64, n: usize) -> f64 {
    let b = Bandit::new(seed);
    let truth = b.true_gradient();
    let est = b.estimate(&b.sample_actions(n, seed), 0.0);
    let diff: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| e - t).collect();
    norm(&diff) / norm(&truth)
}

/// Adding `shift` to every reward changes the mean gradient by `shift`
/// times the mean score, whose expectation is zero. Returns, for each of
/// `projections` fixed random directions, the change projected onto it in
/// units of its Monte-Carlo standard error.
pub fn baseline_shift_z_scores(seed: u64, n: usize, shift: f64, projections: usize) -> Vec<f64> {
    let b = Bandit::new(seed);
    let actions = b.sample_actions(n, seed);
    let plain = b.estimate(&actions, 0.0);
    let shifted = b.estimate(&actions, shift);
    let scores = b.scores();
    let mut rng = RngStream::new(seed, Purpose::Test, 2, 0);
    (0..projections)
        .map(|_| {
            let dir: Vec<f64> = (0..plain.len()).map(|_| rng.standard_normal()).collect();
            let proj = |v: &[f64]| v.iter().zip(&dir).map(|(x, d)| x * d).sum::<f64>();
            let diff = proj(&shifted) - proj(&plain);
            // Per-sample differences are shift * score(a_i).
            let per_action: Vec<f64> = scores.iter().map(|s| shift * proj(s)).collect();
            let xs: Vec<f64> = actions.iter().map(|&a| per_action[a]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            diff / se
        })
        .collect()
}

/// A small deterministic two-provider environment: no user drift and no
/// content creation, so branching one recommendation can only change what
/// happens to the provider that receives it.
pub fn additivity_config() -> EnvironmentConfig {
    let group = |name: &str, x0: f64| ProviderGroupConfig {
        name: name.into(),
        size: 1,
        satisfaction_fn: SatisfactionFn::saturated_log(1.0, x0),
        offset_x0_spread: 0.0,
        no_rec_drift: -0.2,
        exposure_sensitivity: 0.3,
        feedback_sensitivity: 0.4,
        preference_drift: 0.1,
        viability_threshold: -100.0,
        creation_rate: 0.0,
        quality_mean: 0.0,
        quality_std: 0.3,
    };
    EnvironmentConfig {
        num_topics: 3,
        num_users: 2,
        num_providers: 2,
        initial_docs_per_provider: 2,
        horizon: 4,
        user_params: UserParamConfig {
            quality_sensitivity: UniformRange::point(0.3),
            preference_drift: UniformRange::point(0.0),
        },
        provider_groups: vec![group("a", 0.5), group("b", 2.0)],
        user_discount: 0.99,
        provider_discount: 0.99,
        seed: 0,
    }
}

/// Discounted provider returns from step `from` on, for the episode whose
/// user 0 receives `branch` at step `from` and every other action follows
/// a fixed schedule.
fn branch_returns(
    cfg: &EnvironmentConfig,
    seed: u64,
    from: usize,
    branch: Option<DocId>,
) -> Result<Vec<f64>, HarnessError> {
    let (mut env, _) = Environment::reset(cfg, seed)?;
    let docs: Vec<Vec<DocId>> = env
        .providers()
        .iter()
        .map(|p| p.documents.clone())
        .collect();
    let mut returns = vec![0.0; cfg.num_providers];
    let mut discount = 1.0;
    for t in 0..cfg.horizon {
        let fixed = |u: usize| Some(docs[(u + t) % docs.len()][t % docs[0].len()]);
        let actions: Vec<Option<DocId>> = (0..cfg.num_users)
            .map(|u| {
                if u == 0 && t == from {
                    branch
                } else {
                    fixed(u)
                }
            })
            .collect();
        let (_, out) = env.step_partial(&actions)?;
        if t >= from {
            for p in &out.providers {
                returns[p.provider_id] += discount * p.reward;
            }
            discount *= cfg.provider_discount;
        }
    }
    Ok(returns)
}

/// For each provider's document recommended to user 0 at step `from`,
/// compares the summed change in every provider's return (against giving
/// user 0 nothing) with the change in the recommended provider's own return.
/// Returns the largest absolute discrepancy.
pub fn additivity_discrepancy(seed: u64, from: usize) -> Result<f64, HarnessError> {
    let cfg = additivity_config();
    let (env, _) = Environment::reset(&cfg, seed)?;
    let first_docs: Vec<DocId> = env.providers().iter().map(|p| p.documents[0]).collect();
    let base = branch_returns(&cfg, seed, from, None)?;
    let mut worst = 0.0f64;
    for (c, &doc) in first_docs.iter().enumerate() {
        let q = branch_returns(&cfg, seed, from, Some(doc))?;
        let total: f64 = q.iter().zip(&base).map(|(a, b)| a - b).sum();
        let own = q[c] - base[c];
        if own == 0.0 {
            // A recommendation that changes nothing would make the check vacuous.
            return Ok(f64::INFINITY);
        }
        worst = worst.max((total - own).abs());
    }
    Ok(worst)
}

/// Everything `ecosim selftest` runs.
pub fn run_all() -> Result<Vec<Check>, HarnessError> {
    let mut checks = Vec::new();
    let names = ["user utility model", "provider utility model", "actor"];
    let mut worst = [0.0f64; 3];
    for seed in 0..5 {
        let errs = gradient_errors(seed, 10)?;
        for i in 0..3 {
            worst[i] = worst[i].max(errs[i]);
        }
    }
    for i in 0..3 {
        checks.push(Check::new(
            format!("gradient check: {}", names[i]),
            worst[i] < FD_TOLERANCE,
            format!(
                "max relative error {:.3e} over 5 seeds (limit {FD_TOLERANCE:e})",
                worst[i]
            ),
        ));
    }
    let err = score_function_error(0, 100_000);
    checks.push(Check::new(
        "score-function gradient",
        err < 0.02,
        format!("relative error {:.4} over 1e5 samples (limit 0.02)", err),
    ));
    let z = baseline_shift_z_scores(0, 100_000, 3.0, 5);
    let zmax = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    checks.push(Check::new(
        "constant reward shift",
        zmax < 3.0,
        format!("largest projected change {zmax:.2} standard errors (limit 3)"),
    ));
    let mut worst_add = 0.0f64;
    for seed in 0..3 {
        for from in 0..additivity_config().horizon {
            worst_add = worst_add.max(additivity_discrepancy(seed, from)?);
        }
    }
    checks.push(Check::new(
        "uplift additivity",
        worst_add <= 1e-9,
        format!("largest discrepancy {worst_add:.3e} (limit 1e-9)"),
    ));
    Ok(checks)
}
