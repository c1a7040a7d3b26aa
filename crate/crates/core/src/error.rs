use thiserror::Error;

use crate::data::Label;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("split leaves an empty side (train {train}, test {test})")]
    DegenerateSplit { train: usize, test: usize },

    #[error("class {0} is absent from the data")]
    MissingClass(Label),

    #[error("rebalancing keeps no negatives (m_neg = {negatives}, gamma = {gamma})")]
    DegenerateBalance { negatives: usize, gamma: f64 },

    #[error("linear system could not be solved (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("covariance matrix is not positive definite: {0}")]
    SingularSpec(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("all pairwise distances are zero")]
    ZeroDistances,

    #[error("true posterior values are required but absent")]
    MissingTrueEta,

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
