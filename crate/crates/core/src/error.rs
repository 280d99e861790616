use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("level cap {cap} reached while drawing a level")]
    LevelOverflow { cap: u32 },

    #[error("node {0} not found")]
    NodeNotFound(NodeId),

    #[error("node {to} unreachable from {from}")]
    Unreachable { from: NodeId, to: NodeId },

    #[error("ancestor of node {node} at level {level} does not exist")]
    NoAncestor { node: NodeId, level: u32 },

    #[error("operation undefined on an empty graph")]
    EmptyGraph,

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no connectivity threshold found below lambda = {cap}")]
    ThresholdNotFound { cap: f64 },

    #[error("no samples: {0}")]
    EmptyResult(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
