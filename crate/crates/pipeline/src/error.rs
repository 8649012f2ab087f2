use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("ingest: {0}")]
    Ingest(#[from] readtrace_core::ingest::IngestError),
    #[error("statistics: {0}")]
    Stats(#[from] readtrace_stats::StatError),
    #[error("empty join: no student appears in every required source")]
    EmptyJoin,
    #[error("{0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}
