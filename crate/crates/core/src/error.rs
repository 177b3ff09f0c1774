use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, the reconstruction engine and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible parameters: no separation margin satisfies the threshold inequality (theta_s^2 = {theta_sq}, beta = {beta})")]
    InfeasibleParameters { theta_sq: f64, beta: f64 },

    #[error("tree with {nodes} nodes exceeds the node budget of {budget}")]
    NodeBudget { nodes: u128, budget: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty window")]
    EmptyWindow,

    #[error("site {site} out of range for a sequence of length {len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("no stable subtree rooted at the root")]
    NoStableSubtree,

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
