//! Command-line layer for `selcert`: configuration, dataset and votes file
//! formats, and the command implementations behind the `selcert` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod fsio;
pub mod votes;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
