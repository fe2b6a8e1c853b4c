use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite state encountered at step {step}")]
    NumericalFailure { step: usize },

    #[error("importance weight overflows f64 (log-weight {log_weight})")]
    WeightOverflow { log_weight: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("every mixture member assigns zero density to the trajectory")]
    InvalidSupport,

    #[error("state space too large to enumerate ({0} trajectories)")]
    Capacity(u128),

    #[error("optimal proposal undefined: no failure reachable from this state")]
    UndefinedProposal,

    #[error("non-finite loss or gradient")]
    NonFiniteLoss,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
