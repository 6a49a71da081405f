use thiserror::Error;

use crate::label::Label;

#[derive(Debug, Error)]
pub enum Error {
    #[error("labels {a} and {b} are incomparable (different kinds)")]
    IncomparableLabels { a: Label, b: Label },

    #[error("order violation: {lo} is not below {hi}")]
    OrderViolation { lo: Label, hi: Label },

    #[error("label {0} is outside the family universe")]
    ForeignLabel(Label),

    #[error("incomplete family: {0}")]
    IncompleteFamily(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("insufficient net: no stored level at or above {0}")]
    InsufficientNet(Label),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("chain is not strictly ascending at position {0}")]
    ChainNotAscending(usize),

    #[error("budget exceeded: dimension {required} exceeds limit {limit} (needs ~{bytes} bytes of dense storage)")]
    BudgetExceeded { required: usize, limit: usize, bytes: u64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
