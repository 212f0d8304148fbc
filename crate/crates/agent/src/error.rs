use ecosim_core::EnvError;
use ecosim_kernel::KernelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("episode data was collected with parameter version {got}, agent is at {expected}")]
    StaleEpisodes { expected: u64, got: u64 },
    #[error("lambda must lie in [0, 1], got {0}")]
    BadLambda(f64),
    #[error("checkpoint lambda {stored} does not match requested {requested}")]
    LambdaMismatch { stored: f64, requested: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("parameters became non-finite after update")]
    NonFinite,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
