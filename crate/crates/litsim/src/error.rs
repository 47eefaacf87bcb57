//! Crate error type.

use thiserror::Error;

/// Errors surfaced by simulation components.
///
/// Parse-level failures from model output are *not* errors: they are ordinary
/// values ([`crate::policy::ParseFailure`]) that drive the retry loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("corpus: no valid papers after ingestion")]
    EmptyIngest(Box<crate::corpus::IngestReport>),

    #[error("benchmark: {0}")]
    Benchmark(String),

    #[error("index: {0}")]
    Index(String),

    #[error("invalid tool call: {0}")]
    InvalidToolCall(String),

    #[error("continue requested on an exhausted candidate set")]
    ExhaustedPagination,

    #[error("plan rejected: {0}")]
    PlanRejected(String),

    #[error("memory: {0}")]
    Memory(String),

    #[error("assessment out of contract: {0}")]
    Assessment(String),

    #[error("prompt template: {0}")]
    Template(String),

    #[error("full text for {0} not found")]
    FullTextNotFound(String),

    #[error("policy stage degraded after {attempts} attempts: {detail}")]
    PolicyDegraded { attempts: u32, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("metrics: {0}")]
    Metrics(String),
}
