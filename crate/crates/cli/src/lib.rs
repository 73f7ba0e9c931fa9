//! Command-line plumbing for the `saute` binary: config files, the `solve`,
//! `verify`, `run` and `export` subcommands, and the stdio bridge behind
//! `serve`.

pub mod bridge;
pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

pub use error::{CliError, CliResult};
