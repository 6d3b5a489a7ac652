//! Argument parsing and dispatch.

use crate::commands::{self, Outcome};
use crate::config::{self, Versioned};
use crate::error::{CliError, CliResult};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use std::path::PathBuf;

/// Environment variable fixing the worker thread count.
pub const THREADS_ENV: &str = "PHASERET_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "phaseret",
    version,
    about = "Propagation-based phase-contrast retrieval, simulation, CT and resolution metrology"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every configurable command.
#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// JSON configuration file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (`key=value`, dotted keys for nested tables).
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Shorthand for `--set input=PATH`.
    #[arg(short, long)]
    pub input: Option<String>,
    /// Shorthand for `--set output=PATH`.
    #[arg(short, long)]
    pub output: Option<String>,
}

impl Common {
    fn load<T: DeserializeOwned + Versioned>(&self) -> CliResult<T> {
        let mut overrides = self.set.clone();
        if let Some(i) = &self.input {
            overrides.push(format!("input={}", json_string(i)));
        }
        if let Some(o) = &self.output {
            overrides.push(format!("output={}", json_string(o)));
        }
        config::load(self.config.as_deref(), &overrides)
    }
}

/// Quoted so that paths such as `1` or `true` stay strings.
fn json_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Axis and diagonal curves of the filter transfer functions.
    Transfer(Common),
    /// Resolution gain against detector PSF width on a simulated cylinder.
    ResolutionSweep(Common),
    /// Resolution gain against rebinning factor on a simulated CT slice.
    RebinSweep(Common),
    /// Render a disk thickness phantom.
    Phantom(Common),
    /// Propagate a contact image with the linearised TIE.
    Propagate(Common),
    /// Single- or two-material phase retrieval.
    Retrieve(Common),
    /// Filtered back projection of a sinogram, optionally with retrieval.
    Ct(Common),
    /// Dual-energy photoelectric / electron density decomposition.
    Decompose(Common),
    /// Edge spread, line spread and Pearson VII fit around a circular edge.
    Lsf(Common),
    /// Print or write the built-in material table.
    Materials {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn report(outcome: Outcome) -> String {
    format!(
        "{}\nmanifest: {}",
        outcome.summary,
        outcome.manifest.display()
    )
}

pub fn execute(command: &Command) -> CliResult<String> {
    match command {
        Command::Transfer(c) => commands::transfer(&c.load()?).map(report),
        Command::ResolutionSweep(c) => commands::resolution_sweep_cmd(&c.load()?).map(report),
        Command::RebinSweep(c) => commands::rebin_sweep_cmd(&c.load()?).map(report),
        Command::Phantom(c) => commands::phantom(&c.load()?).map(report),
        Command::Propagate(c) => commands::propagate(&c.load()?).map(report),
        Command::Retrieve(c) => commands::retrieve_cmd(&c.load()?).map(report),
        Command::Ct(c) => commands::ct(&c.load()?).map(report),
        Command::Decompose(c) => commands::decompose(&c.load()?).map(report),
        Command::Lsf(c) => commands::lsf(&c.load()?).map(report),
        Command::Materials { output } => commands::materials(output.as_deref()),
    }
}

/// Applies [`THREADS_ENV`] to the global thread pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("{THREADS_ENV}={raw:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))
}
