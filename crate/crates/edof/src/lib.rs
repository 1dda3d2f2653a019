//! File formats, configuration and pipeline orchestration around
//! `edof-core`, plus the `edof` command-line tool.
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod netfile;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use exec::Parallel;
pub use pipeline::Flags;
