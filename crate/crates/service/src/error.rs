use std::io;
use std::path::PathBuf;

use cct_core::CctError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CctError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
}

pub type ServiceResult<T> = Result<T, ServiceError>;

impl ServiceError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        ServiceError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => match e {
                CctError::EmptyInput => "EmptyInput",
                CctError::InconsistentMetrics(_) => "InconsistentMetrics",
                CctError::MissingMetric(_) => "MissingMetric",
                CctError::NonFiniteMetric { .. } => "NonFiniteMetric",
                CctError::InvalidFrame(_) => "InvalidFrame",
                CctError::UnknownNode(_) => "UnknownNode",
                CctError::UnknownPath(_) => "UnknownPath",
                CctError::Parse { .. } => "ParseError",
                CctError::Schema(_) => "SchemaError",
                CctError::Unrepresentable(_) => "Unrepresentable",
                CctError::NameCollision(_) => "NameCollision",
                CctError::TooFewFrames { .. } => "TooFewFrames",
                CctError::QuerySyntax { .. } => "SyntaxError",
                CctError::InvalidPredicate(_) => "InvalidPredicate",
                CctError::UnknownMetric(_) => "UnknownMetric",
                CctError::StaleView(_) => "StaleView",
                CctError::NestedCollapse(_) => "NestedCollapse",
                CctError::InvertedRange { .. } => "InvertedRange",
                CctError::InvalidArgument(_) => "InvalidArgument",
            },
            ServiceError::Io { .. } => "Io",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::UnknownSession(_) => "UnknownSession",
        }
    }

    /// 1 for unreadable input, 2 for semantic errors, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Io { .. } => 3,
            ServiceError::BadRequest(_) => 1,
            ServiceError::Core(
                CctError::EmptyInput
                | CctError::Parse { .. }
                | CctError::Schema(_)
                | CctError::InvalidFrame(_)
                | CctError::InconsistentMetrics(_)
                | CctError::QuerySyntax { .. }
                | CctError::InvalidPredicate(_),
            ) => 1,
            _ => 2,
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::UnknownSession(_)
            | ServiceError::Core(CctError::UnknownPath(_) | CctError::UnknownNode(_)) => 404,
            ServiceError::Core(CctError::StaleView(_) | CctError::NestedCollapse(_)) => 409,
            ServiceError::Core(
                CctError::QuerySyntax { .. } | CctError::InvalidPredicate(_) | CctError::UnknownMetric(_),
            ) => 422,
            ServiceError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 404,
            ServiceError::Io { .. } => 500,
            _ => 400,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut error = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            ServiceError::Core(CctError::QuerySyntax { position, expected }) => {
                error["position"] = json!(position);
                error["expected"] = json!(expected);
            }
            ServiceError::Core(CctError::Parse { line, .. }) => {
                error["line"] = json!(line);
            }
            _ => {}
        }
        json!({ "version": 1, "error": error })
    }
}
