use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("privacy budget violation: delta = {delta:e} must be below 1/n = {limit:e} (n = {n})")]
    BudgetViolation { delta: f64, limit: f64, n: usize },

    #[error("insufficient data: {stage} needs at least {required} samples, got {available}")]
    InsufficientData {
        stage: &'static str,
        required: usize,
        available: usize,
    },

    #[error("{what} overflow: size {size:e} exceeds cap {cap}; raise alpha or the cap, or enable dedup")]
    Overflow { what: &'static str, size: f64, cap: usize },

    #[error("decoder failed: {0}")]
    DecoderFailed(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("Monte-Carlo resolution too coarse: std error {std_error:.3e} exceeds {bound:.3e} (raise effort)")]
    Resolution { std_error: f64, bound: f64 },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks `lo < value < hi`.
pub(crate) fn check_open(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(invalid(name, format!("{value} is outside ({lo}, {hi})")))
    }
}

/// Corruption level: clean data (0) is allowed, full corruption (1) is not.
pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(invalid("gamma", format!("{gamma} is outside [0, 1)")))
    }
}
