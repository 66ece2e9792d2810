//! `random-means run <config.json>`: runs one experiment and writes CSV tables
//! plus a JSON summary.
//!
//! Exit status: 0 success, 2 invalid input, 3 statistical check failed,
//! 4 I/O failure while writing results.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{ExperimentConfig, Format, Overrides};

const EXIT_VALIDATION: u8 = 2;
const EXIT_STATISTICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "random-means", version, about = "Random mean experiments")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run the experiment described by a JSON config.
    ///
    /// Commands (config field `command`): rho, expectation, slln, clt,
    /// power-limit, limit-law. Outputs go to `output_dir`: one CSV per table
    /// (or `results.json` with `format: "json"`) and `summary.json`.
    Run {
        /// Path to the experiment config (JSON).
        config: PathBuf,
        /// Override `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `sim.grid.points_per_axis`.
        #[arg(long)]
        grid: Option<usize>,
        /// Override `sim.n`.
        #[arg(long)]
        n: Option<usize>,
        /// Override `sim.replicates`.
        #[arg(long)]
        replicates: Option<usize>,
        /// Override `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Io(String),
}

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("invalid config {}: {e}", path.display())))?;
    cfg.apply(overrides)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(cfg)
}

fn write(cfg: &ExperimentConfig, out: &Outcome) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", cfg.output_dir.display()));
    fs::create_dir_all(&cfg.output_dir).map_err(io)?;
    match cfg.format {
        Format::Csv => {
            for t in &out.tables {
                fs::write(cfg.output_dir.join(format!("{}.csv", t.name)), t.to_csv())
                    .map_err(io)?;
            }
        }
        Format::Json => {
            let tables: serde_json::Map<String, serde_json::Value> = out
                .tables
                .iter()
                .map(|t| (t.name.clone(), serde_json::to_value(t).unwrap_or_default()))
                .collect();
            let text = serde_json::to_string_pretty(&tables)
                .map_err(|e| Failure::Io(e.to_string()))?;
            fs::write(cfg.output_dir.join("results.json"), text + "\n").map_err(io)?;
        }
    }
    let summary = serde_json::to_string_pretty(&out.summary)
        .map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(cfg.output_dir.join("summary.json"), summary + "\n").map_err(io)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let CliCommand::Run {
        config,
        seed,
        grid,
        n,
        replicates,
        out,
    } = cli.command;
    let overrides = Overrides {
        seed,
        grid,
        n,
        replicates,
        out,
    };
    let result = load(&config, &overrides).and_then(|cfg| {
        let outcome = commands::run(&cfg, &overrides).map_err(|e| match e {
            random_means::Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Validation(other.to_string()),
        })?;
        write(&cfg, &outcome)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string(&outcome.summary).unwrap_or_default()
            );
            if outcome.pass == Some(false) {
                eprintln!("statistical check failed");
                ExitCode::from(EXIT_STATISTICAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
