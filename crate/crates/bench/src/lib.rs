//! Command-line harness around [`mpsca`]: instance files, single solves,
//! oracle runs and Monte-Carlo sweeps with CSV / JSON output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod instance;
pub mod results;

pub use error::{CliError, Result};
