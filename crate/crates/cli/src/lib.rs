//! `ecosim` command line: argument parsing and dispatch. Progress goes to
//! standard error through `log`; results only to files under `--out`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecosim_agent::{AgentError, EcoAgent};
use ecosim_harness::{
    emit_report, evaluate, fmt_num, lambda_sweep, selftest, train, AgentChoice, EvalConfig,
    HarnessError, Scenario, SweepConfig, SweepResult, TrainConfig,
};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ecosim",
    version,
    about = "Recommender ecosystem simulator with a provider-aware agent"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and save its checkpoint and training curve.
    Train(TrainArgs),
    /// Evaluate a saved agent, or the random baseline, on fresh episodes.
    Evaluate(EvaluateArgs),
    /// Train and evaluate over a lambda x learning-rate grid and emit figure data.
    Sweep(SweepArgs),
    /// Re-emit figure data from a saved sweep result.
    Plot(PlotArgs),
    /// Run gradient checks and the uplift additivity check.
    Selftest,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long, default_value = "saturated_log", conflicts_with = "config")]
    pub scenario: String,
    /// Path to a scenario JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, HarnessError> {
        match &self.config {
            Some(p) => Scenario::from_json(&std::fs::read_to_string(p)?),
            None => Scenario::load(&self.scenario),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Master seed. Required; never taken from the clock.
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for rollouts.
    #[arg(long, env = "ECOSIM_THREADS")]
    pub threads: Option<usize>,
}

impl RunArgs {
    fn threads(&self) -> usize {
        self.threads
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Subtract the batch-mean reward before each policy step.
    #[arg(long)]
    pub constant_baseline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Eco,
    Random,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = AgentKind::Eco)]
    pub agent: AgentKind,
    /// Checkpoint written by `train` (required for `--agent eco`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// If given, must match the lambda the checkpoint was trained with.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub rollouts: usize,
    /// Recommend the most probable document instead of sampling.
    #[arg(long)]
    pub greedy_eval: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',', default_values_t = SweepConfig::DEFAULT_LAMBDAS)]
    pub lambda: Vec<f64>,
    /// Comma-separated learning-rate grid.
    #[arg(long, value_delimiter = ',', default_values_t = SweepConfig::DEFAULT_LEARNING_RATES)]
    pub lr: Vec<f64>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub rollouts: usize,
    #[arg(long)]
    pub greedy_eval: bool,
    #[arg(long)]
    pub constant_baseline: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// `sweep.json` written by `sweep`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Failed(_) => EXIT_RUNTIME,
            CliError::Harness(e) => match e {
                HarnessError::Config(_)
                | HarnessError::UnknownScenario { .. }
                | HarnessError::ScenarioFile(_)
                | HarnessError::EmptyGrid(_)
                | HarnessError::Agent(AgentError::BadLambda(_))
                | HarnessError::Agent(AgentError::LambdaMismatch { .. }) => EXIT_INVALID,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        CliError::Harness(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Harness(e.into())
    }
}

fn check_lambda(l: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&l) {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "--lambda must lie in [0, 1], got {l}"
        )))
    }
}

fn check_positive(flag: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{flag} must be positive, got {x}"
        )))
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    check_lambda(a.lambda)?;
    check_positive("--lr", a.lr)?;
    let scenario = a.scenario.load()?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        constant_baseline: a.constant_baseline,
        threads: a.run.threads(),
        ..TrainConfig::new(a.lambda, a.lr, a.run.seed)
    };
    std::fs::create_dir_all(&a.run.out)?;
    log::info!(
        "training on {} (lambda {}, lr {}, {} epochs)",
        scenario.name.as_str(),
        a.lambda,
        a.lr,
        a.epochs
    );
    let result = train(&scenario, &cfg)?;
    if let Some(e) = result.stopped_early_at {
        log::info!("objective plateaued; stopped after epoch {e}");
    }
    result.agent.save(&a.run.out.join("agent.ckpt"))?;
    let mut csv = String::from(
        "epoch,objective,user_reward,provider_reward,viable_providers,user_loss,provider_loss,actor_loss,mean_uplift\n",
    );
    for r in &result.curve {
        let row = [
            r.objective,
            r.user_reward,
            r.provider_reward,
            r.viable_providers,
            r.stats.user_loss,
            r.stats.provider_loss,
            r.stats.actor_loss,
            r.stats.mean_uplift,
        ];
        csv.push_str(&r.epoch.to_string());
        for x in row {
            csv.push(',');
            csv.push_str(&fmt_num(x));
        }
        csv.push('\n');
    }
    std::fs::write(a.run.out.join("curve.csv"), csv)?;
    write_json(&a.run.out.join("train_config.json"), &cfg)?;
    write_json(&a.run.out.join("scenario.json"), &scenario)?;
    log::info!("wrote {}", a.run.out.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    if let Some(l) = a.lambda {
        check_lambda(l)?;
    }
    if a.rollouts == 0 {
        return Err(CliError::Invalid("--rollouts must be at least 1".into()));
    }
    let scenario = a.scenario.load()?;
    let cfg = EvalConfig {
        rollouts: a.rollouts,
        greedy: a.greedy_eval,
        threads: a.run.threads(),
        ..EvalConfig::new(a.run.seed)
    };
    let summary = match a.agent {
        AgentKind::Random => evaluate(AgentChoice::Random, &scenario, &cfg)?,
        AgentKind::Eco => {
            let path = a.checkpoint.as_ref().ok_or_else(|| {
                CliError::Invalid("--checkpoint is required with --agent eco".into())
            })?;
            let agent = EcoAgent::load(path, a.lambda)?;
            if agent.num_topics() != scenario.config.num_topics {
                return Err(CliError::Invalid(format!(
                    "checkpoint was trained with {} topics, scenario has {}",
                    agent.num_topics(),
                    scenario.config.num_topics
                )));
            }
            evaluate(AgentChoice::Eco(&agent), &scenario, &cfg)?
        }
    };
    log::info!(
        "user reward {:.3} ± {:.3}, provider reward {:.3} ± {:.3}, viable providers {:.2}",
        summary.user_reward.mean,
        summary.user_reward.se_or_zero(),
        summary.provider_reward.mean,
        summary.provider_reward.se_or_zero(),
        summary.viable_providers.mean
    );
    std::fs::create_dir_all(&a.run.out)?;
    write_json(&a.run.out.join("eval.json"), &summary)?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    for &l in &a.lambda {
        check_lambda(l)?;
    }
    for &lr in &a.lr {
        check_positive("--lr", lr)?;
    }
    if a.rollouts == 0 {
        return Err(CliError::Invalid("--rollouts must be at least 1".into()));
    }
    let scenario = a.scenario.load()?;
    let cfg = SweepConfig {
        lambdas: a.lambda.clone(),
        learning_rates: a.lr.clone(),
        epochs: a.epochs,
        rollouts: a.rollouts,
        greedy_eval: a.greedy_eval,
        constant_baseline: a.constant_baseline,
        threads: a.run.threads(),
        ..SweepConfig::new(a.run.seed)
    };
    let result = lambda_sweep(&scenario, &cfg)?;
    std::fs::create_dir_all(&a.run.out)?;
    write_json(&a.run.out.join("sweep.json"), &result)?;
    write_json(&a.run.out.join("sweep_config.json"), &cfg)?;
    let files = emit_report(&result, &a.run.out)?;
    log::info!("wrote {} files to {}", files.len() + 2, a.run.out.display());
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.input)?;
    let result: SweepResult = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", a.input.display())))?;
    let files = emit_report(&result, &a.out)?;
    log::info!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    let checks = selftest::run_all()?;
    let mut failed = 0;
    for c in &checks {
        if c.passed {
            log::info!("{c}");
        } else {
            log::error!("{c}");
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} of {} self-checks failed",
            checks.len()
        )));
    }
    log::info!("all {} self-checks passed", checks.len());
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Selftest => cmd_selftest(),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
