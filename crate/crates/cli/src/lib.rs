//! Command-line front end for `phaseret`: file formats, run configuration
//! and the experiment drivers behind each subcommand.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod materials;

pub use error::{CliError, CliResult};
