//! Command-line front end and HTTP JSON API over `spindle-core`.
//!
//! The `spindle` binary parses [`commands::Cli`] and dispatches to the
//! handlers in [`commands`]; `spindle serve` mounts [`server::router`].

pub mod commands;
pub mod data;
pub mod error;
pub mod server;

pub use error::{CliError, Result};
