//! Calling context trees: ingestion, structural operations, a path query
//! language, pruning state and a tidy layout for interactive exploration.

pub mod error;
pub mod ingest;
pub mod layout;
pub mod model;
pub mod ops;
pub mod path;
pub mod prune;
pub mod query;

pub use error::{CctError, Result};
pub use ingest::{read, read_folded, read_literal, write_folded, write_literal, Format};
pub use layout::{layout, LayoutResult};
pub use model::{
    build, CctNode, Frame, GraphFrame, GraphFrameBuilder, MetricTable, NodeId, PathRecord, TIME, TIME_INC,
};
pub use path::{node_path, resolve_path};
pub use prune::ViewState;
pub use query::{parse, Query};
