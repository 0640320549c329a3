// SPDX-License-Identifier: Apache-2.0

//! `loralink` command-line front end.

mod commands;
mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use manifest::{RunManifest, STDOUT};

const EXIT_STATUS_HELP: &str = "\
Exit status:
  0  success
  1  I/O or transport failure
  2  usage error (bad or missing flags)
  3  validation error (bad fixture, infeasible request)
  4  tolerance failure (reconstruct deviation above --tolerance)";

#[derive(Debug, Parser)]
#[command(name = "loralink", version, about = "LoRa link-quality toolkit", after_help = EXIT_STATUS_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Measurement CSV. Defaults to the bundled field-campaign data.
    #[arg(long, global = true, value_name = "PATH")]
    pub fixture: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Allowed deviation in dB for `reconstruct`.
    #[arg(long, global = true, default_value_t = 0.05, value_name = "DB")]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effective signal power, path loss, free-space loss and excess loss for one link.
    Budget(commands::BudgetArgs),
    /// Rebuild the excess-loss grid from a measurement fixture and compare it with a reference.
    Reconstruct(commands::ReconstructArgs),
    /// Pick SF, bandwidth and coding rate from a measurement fixture.
    Recommend(commands::RecommendArgs),
    /// Run the TDMA gateway simulator.
    Simulate(commands::SimulateArgs),
    /// One metric over the SF x BW grid, as plotting-ready CSV.
    Sweep(commands::SweepArgs),
    /// Turn a simulator report into channel updates.
    Uplink(commands::UplinkArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn invalid(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// A finished run: what to print, plus a verdict that may still fail the
/// process after the output is written.
pub struct Rendered {
    pub manifest: RunManifest,
    pub body: String,
    pub verdict: Result<(), CliError>,
}

impl Rendered {
    pub fn ok(manifest: RunManifest, body: String) -> Self {
        Rendered {
            manifest,
            body,
            verdict: Ok(()),
        }
    }
}

fn output_label(global: &GlobalArgs) -> String {
    global
        .output
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| STDOUT.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if !(g.tolerance.is_finite() && g.tolerance >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tolerance must be a non-negative number, got {}",
            g.tolerance
        )));
    }
    let rendered = match &cli.command {
        Command::Budget(a) => commands::budget(g, a)?,
        Command::Reconstruct(a) => commands::reconstruct(g, a)?,
        Command::Recommend(a) => commands::recommend(g, a)?,
        Command::Simulate(a) => commands::simulate(g, a)?,
        Command::Sweep(a) => commands::sweep(g, a)?,
        Command::Uplink(a) => commands::uplink(g, a)?,
    };
    let text = format!("{}{}", rendered.manifest, rendered.body);
    match &g.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    rendered.verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("loralink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
