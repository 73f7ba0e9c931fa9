use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative safety cost {cost} at step {step}")]
    NegativeSafetyCost { step: usize, cost: f64 },

    #[error("non-finite observation component {index} (value {value})")]
    NonFiniteObservation { index: usize, value: f64 },

    #[error("action does not match the action space: {0}")]
    InvalidAction(String),

    #[error("step called on a finished episode")]
    EpisodeFinished,

    #[error("rollout failed at step {step}: {source}")]
    Rollout {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed at seed {seed}, trajectory {trajectory}: {source}")]
    Evaluation {
        seed: usize,
        trajectory: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("enumeration of {count} action sequences exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("transition for state {state}, action {action} is not deterministic")]
    NotDeterministic { state: usize, action: usize },

    #[error("V_n not monotone in n at state {state}, z node {z_node}, list index {index}: {lower} > {upper}")]
    MonotonicityViolation { state: usize, z_node: usize, index: usize, lower: f64, upper: f64 },

    #[error("non-finite value during {context}")]
    Diverged { context: String },

    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }
}
