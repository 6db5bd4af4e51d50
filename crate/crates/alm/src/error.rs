use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model assumptions not satisfied: {0}")]
    Validation(String),

    #[error("event cap of {cap} exceeded at t = {t}")]
    EventCap { cap: usize, t: f64 },

    #[error("point has no preimage: {0}")]
    NoPreimage(String),

    #[error("time {0} is not a save time of this record")]
    NotSaved(f64),

    #[error("numerical warning: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, AlmError>;
