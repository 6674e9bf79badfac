use thiserror::Error;

pub type Result<T> = std::result::Result<T, MppError>;

/// Errors produced by trajectory, compensator and calculus operations.
#[derive(Debug, Error)]
pub enum MppError {
    #[error("invalid mark space: {0}")]
    InvalidMarkSpace(String),
    #[error("unknown mark `{0}` for this mark space")]
    UnknownMark(String),
    #[error("time {time} outside valid range: {context}")]
    TimeOutOfRange { time: f64, context: String },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid compensator: {0}")]
    InvalidCompensator(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid integrand: {0}")]
    InvalidIntegrand(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("explosion guard tripped: more than {limit} events before the horizon")]
    ExplosionGuard { limit: usize },
    #[error("merge error: {0}")]
    Merge(String),
    #[error("the zero symbol is reserved and not a valid mark here")]
    ZeroSymbolForbidden,
    #[error("mark `{0}` is not numeric")]
    NonNumericMark(String),
    #[error("integrand and martingale family use different mark spaces")]
    MarkSpaceMismatch,
    #[error("invalid value function: {0}")]
    InvalidValueFunction(String),
    #[error("self-bracket requested for mark `{0}`; pairs must be distinct")]
    SelfBracket(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format error: {0}")]
    Format(String),
}
