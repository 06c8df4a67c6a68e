//! Command-line orchestration for `dnl-core`: config parsing, run
//! dispatch and the on-disk artifacts (CSV series, JSON reports).

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Equilibrium, sandwich profiles and weights on the grid.
    Profile,
    /// Time-step the rescaled equation and record diagnostics.
    Simulate,
    /// Hardy-Poincare constant per angular sector.
    Spectrum,
    /// Exponential fits of a stored run.
    Rates,
    /// Decay statements and the log-Sobolev chain on a stored run.
    Verify,
    /// Inequality suite on stored snapshots.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Rates => "rates",
            Command::Verify => "verify",
            Command::Check => "check",
        }
    }
}

/// Execute `command` for one config file.
pub fn run(command: Command, config: &Path) -> Result<PathBuf, CliError> {
    let cfg = RunConfig::load(config)?;
    execute(command, &cfg)?;
    Ok(cfg.output_dir())
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Profile => commands::profile(cfg),
        Command::Simulate => commands::simulate_cmd(cfg),
        Command::Spectrum => commands::spectrum(cfg),
        Command::Rates => commands::rates(cfg),
        Command::Verify => commands::verify(cfg),
        Command::Check => commands::check(cfg),
    }
}

/// Run every config concurrently. Output directories must be distinct.
/// Returns one result per config, in input order.
pub fn run_all(command: Command, configs: &[PathBuf]) -> Vec<Result<PathBuf, CliError>> {
    let loaded: Vec<Result<RunConfig, CliError>> =
        configs.iter().map(|p| RunConfig::load(p)).collect();
    let mut seen = HashSet::new();
    let mut clash = vec![false; configs.len()];
    for (k, c) in loaded.iter().enumerate() {
        if let Ok(c) = c {
            clash[k] = !seen.insert(c.output_dir());
        }
    }
    loaded
        .into_par_iter()
        .zip(clash)
        .map(|(cfg, dup)| {
            let cfg = cfg?;
            if dup {
                return Err(CliError::Config {
                    key: Some("output.path".into()),
                    detail: format!("{} is shared with another run", cfg.output_dir().display()),
                });
            }
            execute(command, &cfg)?;
            Ok(cfg.output_dir())
        })
        .collect()
}
