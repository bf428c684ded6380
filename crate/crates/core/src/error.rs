use thiserror::Error;

/// Errors produced by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("imaginary part {im} exceeds the kernel's certified budget {budget}")]
    ImaginaryBudget { im: f64, budget: f64 },

    #[error("series tail bound {bound:e} exceeds tolerance {tol:e}; nmax must be at least {required}")]
    TailBound { bound: f64, tol: f64, required: usize },

    #[error("cache drift {drift:e} exceeds {limit:e} at step {step}")]
    CacheDrift { drift: f64, limit: f64, step: u64 },

    #[error("need at least {needed} samples, got {found}")]
    NotEnoughSamples { needed: usize, found: usize },

    #[error("bulk condition violated: {0}")]
    BulkCondition(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
