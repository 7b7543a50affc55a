use thiserror::Error;

#[derive(Debug, Error)]
pub enum SapError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("localization failure: {0}")]
    Localization(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numerical instability at t = {t}: {msg}")]
    Numerical { t: f64, msg: String },
    #[error("undefined mixing angle: both couplings vanish")]
    UndefinedAngle,
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type SapResult<T> = Result<T, SapError>;
