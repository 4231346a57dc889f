//! Command-line front end: each command computes a table of records and
//! emits it as a deterministic CSV or JSON report.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Artifact};
pub use config::{Cli, CommandName, Format, RunConfig};
pub use report::{emit, Record, Report};
