use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("failed to parse experiment config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("failed to parse metrics CSV at line {line}: {reason}")]
    MetricsParse { line: usize, reason: String },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Core(#[from] mslqr::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
