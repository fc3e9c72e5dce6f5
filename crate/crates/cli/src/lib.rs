//! Command-line scenario runner for `ne-lab`: `validate`, `run`, `certify`
//! and `batch` over TOML scenario files.

// `!(a < b)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use ne_lab::seeker::StepSize;

use crate::commands::RunOptions;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ne-lab", version, about = "Distributed Nash equilibrium seeking for coalition games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// A step size given on the command line: a positive number or `auto`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaArg(pub StepSize);

impl FromStr for AlphaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(AlphaArg(StepSize::Auto));
        }
        match s.parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Ok(AlphaArg(StepSize::Fixed(a))),
            _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunFlags {
    /// Step size, overriding the scenario (number or "auto").
    #[arg(long)]
    pub alpha: Option<AlphaArg>,
    /// Iteration cap, overriding the scenario.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Solve for the equilibrium centrally first.
    #[arg(long, value_enum)]
    pub oracle: Option<Switch>,
    /// Keep full states and check every Lyapunov inequality.
    #[arg(long)]
    pub audit: bool,
    /// Record every n-th iteration.
    #[arg(long)]
    pub record_every: Option<usize>,
}

impl RunFlags {
    fn options(&self, out_dir: Option<PathBuf>) -> RunOptions {
        RunOptions {
            alpha: self.alpha.map(|a| a.0),
            iterations: self.iters,
            oracle: self.oracle.map(|s| s == Switch::On),
            audit: self.audit,
            out_dir,
            record_every: self.record_every,
            execution: None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario: parse, connectivity, weights and monotonicity.
    Validate {
        /// Scenario file, or the name of a builtin.
        scenario: String,
    },
    /// Run the seeker and write CSV, JSON and SVG artifacts.
    Run {
        scenario: String,
        #[command(flatten)]
        flags: RunFlags,
        /// Output directory [default: ne-lab-out/<name>].
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print the JSON summary instead of a one-line report.
        #[arg(long)]
        json: bool,
    },
    /// Compute the certified step size and every stability certificate.
    Certify {
        scenario: String,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every *.toml in a directory concurrently (NE_LAB_THREADS caps the pool).
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long, default_value = "ne-lab-out")]
        out_dir: PathBuf,
    },
}

fn report_error(err: &mut dyn Write, e: &CliError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    e.exit_code()
}

/// Parses `args` and executes the command, returning the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return e.exit_code();
        }
    };
    match cli.command {
        Command::Validate { scenario } => match commands::validate(&scenario) {
            Ok(msg) => {
                let _ = writeln!(out, "{msg}");
                0
            }
            Err(e) => report_error(err, &e),
        },
        Command::Run { scenario, flags, out_dir, json } => match commands::run_scenario(&scenario, &flags.options(out_dir)) {
            Ok(summary) => {
                if json {
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
                } else {
                    let _ = writeln!(
                        out,
                        "{}: {} after {} iterations (alpha {:e}); outputs in {}",
                        summary.metadata.scenario,
                        summary.metadata.verdict,
                        summary.metadata.iterations,
                        summary.metadata.alpha,
                        summary.outputs.json.parent().map(|p| p.display().to_string()).unwrap_or_default()
                    );
                }
                summary.exit_code
            }
            Err(e) => report_error(err, &e),
        },
        Command::Certify { scenario, out: file } => match commands::certify(&scenario) {
            Ok(report) => {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                if let Some(path) = file {
                    if let Err(e) = std::fs::write(&path, format!("{text}\n")) {
                        return report_error(err, &CliError::io(path, e));
                    }
                }
                let _ = writeln!(out, "{text}");
                0
            }
            Err(e) => report_error(err, &e),
        },
        Command::Batch { dir, flags, out_dir } => match commands::batch(&dir, &out_dir, &flags.options(None)) {
            Ok(items) => {
                for item in &items {
                    let status = match &item.result {
                        Ok(s) => format!("{} after {} iterations", s.metadata.verdict, s.metadata.iterations),
                        Err(e) => format!("error: {e}"),
                    };
                    let _ = writeln!(out, "{}: exit {} ({status})", item.scenario.display(), item.exit_code());
                }
                commands::batch_exit_code(&items)
            }
            Err(e) => report_error(err, &e),
        },
    }
}
