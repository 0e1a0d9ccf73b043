//! Command-line driver and HTTP snapshot API.

pub mod api;
pub mod commands;
pub mod server;

pub use commands::{run, Cli, CliError};
