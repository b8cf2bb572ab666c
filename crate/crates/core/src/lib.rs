//! Twig pattern matching over Dewey-labelled XML using a path guide and
//! per-query DataTables.

pub mod dewey;
pub mod document;
pub mod dt;
pub mod index;
pub mod matcher;
pub mod metrics;
pub mod oracle;
pub mod path_guide;
pub mod twig;
pub mod workload;

pub use dewey::{DeweyLabel, LabelError};
pub use document::{generate, ingest, GeneratorConfig, IngestError, NodeEvent};
pub use dt::{build_dt_schema, DataTable, DtRecord, DtSchema};
pub use index::{Index, IndexError};
pub use matcher::{evaluate, evaluate_twig, execute, MatchTuple, Plan, ResultSet};
pub use metrics::{AccessLog, Metrics};
pub use path_guide::{GuideId, PathGuide};
pub use twig::{parse, split, Axis, Decomposition, NodeTest, ParseError, Step, TwigPattern};
pub use workload::{Engine, NamedQuery};
