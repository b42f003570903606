use thiserror::Error;

/// Errors raised across the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid environmental model: {0}")]
    ModelValidity(String),

    #[error("inference failed: {0}")]
    Inference(String),

    #[error("particle filter degenerated at t = {time:.3} years")]
    Degeneracy { time: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
