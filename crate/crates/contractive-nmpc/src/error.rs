use thiserror::Error;

/// Errors surfaced by model construction, sampling, simulation and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("state {0:?} is outside the admissible set")]
    InadmissibleState(Vec<f64>),

    #[error("solver returned no feasible sequence")]
    Infeasible,

    #[error("admissible-set sampler exhausted after {0} rejections")]
    SamplingExhausted(u64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("log format error: {0}")]
    LogFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
