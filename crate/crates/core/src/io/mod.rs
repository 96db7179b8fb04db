//! Configuration files, matrix files, the eigendecomposition cache and run
//! reports.

pub mod cache;
pub mod config;
pub mod matrix;
pub mod report;

pub use cache::{cache_key, CacheStatus, EigenCache};
pub use config::{load_config, RunConfig, Setting, TaskKind, TaskSettings};
pub use matrix::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use report::{ConfigEcho, ErrorRecord, ReportDocument, Status, TOOL_VERSION};
