use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity that must lie in a given domain does not.
    #[error("domain error: {0}")]
    Domain(String),

    /// Configuration value violates its constraint. `key` is the dotted config path.
    #[error("invalid config value `{key}`: {constraint}")]
    InvalidConfig { key: String, constraint: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Pooled design matrix has no positive smallest eigenvalue.
    #[error("loss is not strongly convex on this dataset (smallest Hessian eigenvalue {mu:e})")]
    NotStronglyConvex { mu: f64 },

    #[error("training diverged at round {round}: loss is {loss}")]
    Diverged { round: usize, loss: f64 },

    /// Convergence factor A >= 1, so the asymptotic gap does not exist.
    #[error("no convergence: contraction factor A = {factor} >= 1")]
    NoConvergence { factor: f64 },

    #[error("brute-force assignment refused for {users}x{rbs} instance (limit 8x8)")]
    TooLarge { users: usize, rbs: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
