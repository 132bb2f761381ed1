use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("model is not bound: {0}")]
    NotBound(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("scheme or representation mismatch: {0}")]
    SchemeMismatch(String),

    #[error("norm drift {drift:.3e} exceeds {limit:.1e} at t = {t}")]
    NormDrift { drift: f64, limit: f64, t: f64 },

    #[error("density matrix eigenvalue {value:.3e} below {limit:.1e} at t = {t}")]
    PositivityViolation { value: f64, limit: f64, t: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
