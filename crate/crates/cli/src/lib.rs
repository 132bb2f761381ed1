//! Batch front end for the `gpci` library: configuration parsing, run
//! orchestration and plain-text artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod lvc;
pub mod output;

pub use config::{parse_config, read_config, RunConfig};
pub use error::CliError;
