use thiserror::Error;

use crate::model::NodeId;

pub type Result<T, E = CctError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CctError {
    #[error("no call paths given")]
    EmptyInput,
    #[error("inconsistent metrics: {0}")]
    InconsistentMetrics(String),
    #[error("metric `{0}` is missing")]
    MissingMetric(String),
    #[error("metric `{metric}` is not finite at {node}")]
    NonFiniteMetric { metric: String, node: String },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no node at path `{0}`")]
    UnknownPath(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot represent in folded format: {0}")]
    Unrepresentable(String),
    #[error("metric `{0}` already exists")]
    NameCollision(String),
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("query syntax error at {position}: expected {}", expected.join(" or "))]
    QuerySyntax { position: usize, expected: Vec<String> },
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("query references unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("view state is stale: {0}")]
    StaleView(String),
    #[error("{0} lies inside a collapsed or elided subtree")]
    NestedCollapse(String),
    #[error("inverted range: lo {lo} > hi {hi}")]
    InvertedRange { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
