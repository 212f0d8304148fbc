//! Experiment harness: built-in scenarios, training and evaluation loops,
//! lambda sweeps, and figure data.

pub mod error;
pub mod metrics;
pub mod report;
pub mod run;
pub mod scenario;
pub mod selftest;
pub mod stats;

pub use error::HarnessError;
pub use metrics::{decompose_provider_reward, RewardDecomposition, RolloutMetrics};
pub use report::{emit_report, fmt_num, FIGURE_CSVS};
pub use run::{
    evaluate, lambda_sweep, objective, par_map, train, AgentChoice, EpochRecord, EvalConfig,
    EvalSummary, SweepConfig, SweepEntry, SweepResult, TrainConfig, TrainResult,
};
pub use scenario::{Scenario, ScenarioName};
pub use stats::{pearson, pooled_se, spearman, spread_in_pooled_se, MeanSe};
