use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("landscape grid rejected: non-finite loss {value} at alpha={alpha}, beta={beta}")]
    GridRejected { alpha: f64, beta: f64, value: f64 },

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by non-finite arithmetic during training or evaluation.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::GridRejected { .. })
    }
}
