use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step-size contract violated: all {trials} AGA trials failed, last trial step {last_step:e} (is mu_c <= 1/B?)")]
    AgaExhausted { trials: usize, last_step: f64 },

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("shift ({0}, {1}) lies outside the admissible range")]
    ShiftOutOfRange(i64, i64),

    #[error("dense assembly of dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("certificate violated: {0}")]
    Certificate(String),

    #[error("certificate violated: {message}")]
    BlindCertificate {
        message: String,
        state: Box<crate::recon::BlindState>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
