use thiserror::Error;

use crate::experiment::ConfigIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid access policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{count} deterministic policies exceed the enumeration limit of {limit}; use value iteration")]
    Capacity { count: u128, limit: u128 },

    #[error("result violates an invariant: {0}")]
    Invariant(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("{} configuration error(s):\n{}", .0.len(), .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigIssue>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Invariant(_))
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
