use ecosim_agent::EcoAgent;
use ecosim_core::{ProviderStepOutcome, Recommendation};
use ecosim_harness::{
    decompose_provider_reward, emit_report, evaluate, lambda_sweep, pearson, spearman, train,
    AgentChoice, EvalConfig, MeanSe, Scenario, SweepConfig, SweepResult, TrainConfig, FIGURE_CSVS,
};

fn short_train(lambda: f64, seed: u64, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(lambda, 0.03, seed);
    cfg.epochs = epochs;
    cfg.envs_per_epoch = 2;
    cfg
}

fn saved(agent: &EcoAgent) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.ckpt");
    agent.save(&path).unwrap();
    std::fs::read(path).unwrap()
}

fn short_eval(seed: u64, rollouts: usize) -> EvalConfig {
    let mut cfg = EvalConfig::new(seed);
    cfg.rollouts = rollouts;
    cfg
}

#[test]
fn zero_epochs_returns_the_initial_agent() {
    let scenario = Scenario::load("saturated_log").unwrap();
    let a = train(&scenario, &short_train(0.5, 4, 0)).unwrap();
    let b = train(&scenario, &short_train(0.5, 4, 0)).unwrap();
    assert!(a.curve.is_empty());
    assert_eq!(a.agent.version(), 0);
    assert_eq!(saved(&a.agent), saved(&b.agent));
}

#[test]
fn training_is_reproducible() {
    let scenario = Scenario::load("linear").unwrap();
    let a = train(&scenario, &short_train(0.3, 9, 2)).unwrap();
    let mut threaded = short_train(0.3, 9, 2);
    threaded.threads = 3;
    let b = train(&scenario, &threaded).unwrap();
    assert_eq!(a.curve.len(), 2);
    assert_eq!(a.curve, b.curve);
    assert_eq!(saved(&a.agent), saved(&b.agent));
}

#[test]
fn random_evaluation_is_deterministic() {
    let scenario = Scenario::load("subgroup_init").unwrap();
    let a = evaluate(AgentChoice::Random, &scenario, &short_eval(3, 4)).unwrap();
    let b = evaluate(AgentChoice::Random, &scenario, &short_eval(3, 4)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(a.n, 4);
    assert_eq!(a.group_rec_counts.len(), 2);
}

#[test]
fn single_rollout_has_no_standard_error() {
    let scenario = Scenario::load("saturated_log").unwrap();
    let s = evaluate(AgentChoice::Random, &scenario, &short_eval(1, 1)).unwrap();
    assert_eq!(s.user_reward.se, None);
    assert_eq!(s.provider_reward.n, 1);
}

#[test]
fn random_policy_loses_providers_and_a_user_focused_agent_beats_it() {
    let scenario = Scenario::load("saturated_log").unwrap();
    let random = evaluate(AgentChoice::Random, &scenario, &short_eval(0, 10)).unwrap();
    assert!(random.viable_providers.mean < scenario.config.num_providers as f64);

    let mut cfg = TrainConfig::new(0.0, 0.03, 0);
    cfg.epochs = 40;
    cfg.plateau_epochs = None;
    let trained = train(&scenario, &cfg).unwrap();
    let eco = evaluate(
        AgentChoice::Eco(&trained.agent),
        &scenario,
        &short_eval(0, 10),
    )
    .unwrap();
    assert!(
        eco.user_reward.mean > random.user_reward.mean,
        "eco {:?} vs random {:?}",
        eco.user_reward,
        random.user_reward
    );
}

#[test]
fn one_point_sweep_matches_train_then_evaluate() {
    let scenario = Scenario::load("saturated_log").unwrap();
    let mut cfg = SweepConfig::new(5);
    cfg.lambdas = vec![0.0];
    cfg.learning_rates = vec![0.03];
    cfg.epochs = 2;
    cfg.envs_per_epoch = 2;
    cfg.rollouts = 3;
    let sweep = lambda_sweep(&scenario, &cfg).unwrap();
    assert_eq!(sweep.entries.len(), 1);
    assert_eq!(sweep.selected, vec![0]);

    let trained = train(&scenario, &cfg.train_config(0.0, 0.03)).unwrap();
    let eval = evaluate(
        AgentChoice::Eco(&trained.agent),
        &scenario,
        &cfg.eval_config(),
    )
    .unwrap();
    assert_eq!(sweep.entries[0].curve, trained.curve);
    assert_eq!(
        serde_json::to_string(&sweep.entries[0].eval).unwrap(),
        serde_json::to_string(&eval).unwrap()
    );
}

#[test]
fn empty_sweep_writes_header_only_figures_reproducibly() {
    let scenario = Scenario::load("subgroup_slope").unwrap();
    let result = SweepResult::empty(&scenario);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let written = emit_report(&result, a.path()).unwrap();
    emit_report(&result, b.path()).unwrap();
    assert!(written.last().unwrap().ends_with("manifest.json"));
    for file in FIGURE_CSVS {
        let text = std::fs::read_to_string(a.path().join(file)).unwrap();
        assert_eq!(text.lines().count(), 1, "{file}: {text}");
        assert_eq!(text, std::fs::read_to_string(b.path().join(file)).unwrap());
    }
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn reward_splits_by_feedback_share() {
    // Drift -0.5, exposure 0.4, user feedback 0.3: feedback 0.2, reward 0.1.
    let step = ProviderStepOutcome {
        provider_id: 0,
        group: 0,
        recommendations: vec![Recommendation {
            doc_id: 0,
            topic: 0,
            user_id: 0,
            user_reward: 3.0,
        }],
        inventory_size: 1,
        sum_user_reward: 3.0,
        drift_part: -0.5,
        exposure_part: 0.4,
        user_feedback_part: 0.3,
        feedback: 0.2,
        reward: 0.1,
        satisfaction: 1.0,
        left: false,
    };
    let d = decompose_provider_reward(&step);
    assert!((d.drift_part + 0.25).abs() < 1e-12);
    assert!((d.rec_part - 0.2).abs() < 1e-12);
    assert!((d.feedback_part - 0.15).abs() < 1e-12);
}

#[test]
fn correlations() {
    assert_eq!(pearson(&[0.1, 0.5, 0.9], &[2.0, 2.0, 2.0]), None);
    let r = pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap();
    assert!((r + 1.0).abs() < 1e-12);
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0]).unwrap();
    assert!((rho - 1.0).abs() < 1e-12);
    assert_eq!(MeanSe::of(&[]).n, 0);
}
