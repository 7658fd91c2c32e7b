//! File ingestion, report rendering and subcommand logic behind the `soplab` binary.

pub mod commands;
pub mod io;
pub mod report;

pub use commands::Outcome;
pub use report::{Cell, Report, Table};
