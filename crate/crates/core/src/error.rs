use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported model kind: {0}")]
    UnsupportedKind(String),

    #[error("value iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invalid grid layout: {0}")]
    Layout(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("learner error: {0}")]
    Learner(String),

    /// The constrained problem has no policy within budget.
    #[error("infeasible constraint: minimum achievable violation {min_violation} exceeds budget {budget}")]
    Infeasible { min_violation: f64, budget: f64 },

    #[error("lagrange multiplier search exceeded cap {cap}")]
    MultiplierCap { cap: f64 },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
