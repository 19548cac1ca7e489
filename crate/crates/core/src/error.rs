use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible allocation: domain {domain} shares sum to {total}")]
    Infeasible { domain: usize, total: f64 },

    #[error("invalid share {value} at slice {slice}, domain {domain}")]
    InvalidShare {
        slice: usize,
        domain: usize,
        value: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("agent {agent} update failed: {source}")]
    AgentUpdate {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training aborted after {} iterations: {source}", partial.rows.len())]
    Training {
        partial: Box<crate::report::TrainingReport>,
        #[source]
        source: Box<Error>,
    },

    #[error("behaviour cloning diverged after {} epochs", losses.len())]
    Diverged { losses: Vec<f64> },

    #[error("report schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user-provided configuration rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
