use thiserror::Error;

use crate::model::OpId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("history is not well formed at event {index}: {reason}")]
    IllFormed { index: usize, reason: String },
    #[error("operation {0} does not occur in the history")]
    UnknownOp(OpId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A program, workload or object was assembled inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// A two-process object was accessed by a third process.
    #[error("capability error: {0}")]
    Capability(String),
    /// A caller violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Shared state was found in a shape its writers can never produce.
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("illegal schedule item at index {index}: {reason}")]
    Schedule { index: usize, reason: String },
    /// An exhaustive search outgrew its configured bound.
    #[error("capacity exceeded: {what} (frontier {frontier})")]
    Capacity { what: String, frontier: usize },
    #[error("point rule error: {0}")]
    Rule(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
