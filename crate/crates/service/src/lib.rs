//! Command-line tool and HTTP session service for calling context trees.

pub mod cli;
pub mod error;
pub mod http;
pub mod render;
pub mod session;

pub use error::{ServiceError, ServiceResult};
pub use session::{Command, Session, Source};
