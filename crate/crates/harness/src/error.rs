use ecosim_agent::AgentError;
use ecosim_core::{ConfigError, EnvError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("unknown scenario {name:?}; valid names: {valid}")]
    UnknownScenario { name: String, valid: String },
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("invalid scenario file: {0}")]
    ScenarioFile(String),
}
