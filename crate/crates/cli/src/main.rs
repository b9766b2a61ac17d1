//! `hurst-sense`: command-line harness for the Hurst-sensitivity experiments.
//!
//! ```text
//! hurst-sense <experiment> --config <file.json> [--seed N] [--out <path>]
//! ```
//!
//! The experiment name selects one of the dispatchers in [`experiments`];
//! everything else comes from the JSON configuration, with `--seed` and
//! `--out` overriding the corresponding fields.  Results go to the output
//! path (or stdout) as CSV; wall-clock time goes to stderr so that reruns
//! stay byte-identical.  Exit codes: 0 success, 2 usage or configuration
//! error, 3 numerical failure (which still writes a metadata-only report to
//! the output path when one is set).
//!
//! `HURST_SENSE_THREADS` caps the worker pool; replications are reduced in
//! replication order, so the thread count never changes results.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use hurst_sense_core::ExperimentReport;

mod config;
mod csv;
mod error;
mod experiments;

use config::ExperimentConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "hurst-sense", version, disable_help_subcommand = true)]
/// Experiment harness for Hurst-parameter sensitivity of fractional models.
struct Cli {
    /// Experiment to run (see --help for the list).
    #[arg(value_name = "EXPERIMENT", help = experiment_help())]
    experiment: String,

    /// JSON configuration file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Root seed, overriding the configuration's `seed` field.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output CSV path ('-' for stdout), overriding the configuration's
    /// `out` field.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn experiment_help() -> String {
    format!("Experiment to run: one of {}", experiments::EXPERIMENTS.join(", "))
}

/// Applies `HURST_SENSE_THREADS` before any parallel region starts.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HURST_SENSE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "HURST_SENSE_THREADS must be a positive integer, got '{raw}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("could not size the thread pool: {e}")))
}

fn write_output(path: Option<&std::path::Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(path) if path.as_os_str() != "-" => fs::write(path, bytes)?,
        _ => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let experiment = cli.experiment.as_str();
    if !experiments::EXPERIMENTS.contains(&experiment) {
        return Err(CliError::Usage(format!(
            "unknown experiment '{experiment}' (known: {})",
            experiments::EXPERIMENTS.join(", ")
        )));
    }
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", cli.config.display())))?;
    let config = ExperimentConfig::from_json(&text)?;
    if let Some(name) = &config.experiment {
        if name != experiment {
            return Err(CliError::Usage(format!(
                "configuration names experiment '{name}' but the command line says '{experiment}'"
            )));
        }
    }
    let seed = cli.seed.unwrap_or(config.seed);
    let hash = config.canonical_hash(experiment, seed);
    let out_path: Option<PathBuf> =
        cli.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));

    let started = Instant::now();
    match experiments::run(experiment, &config, seed) {
        Ok(report) => {
            let mut buffer = Vec::new();
            csv::write_report(&mut buffer, &report, seed, &hash)?;
            write_output(out_path.as_deref(), &buffer)?;
            eprintln!(
                "{experiment}: {} rows in {:.3} s",
                report.rows.len(),
                started.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Err(err) => {
            // A numerical failure still leaves a headers-and-metadata report
            // behind so batch runs can tell "failed" from "never ran".
            if err.emit_partial() {
                if let Some(path) = out_path.as_deref() {
                    let mut partial = ExperimentReport::<f64>::new(experiment);
                    partial.push_metadata("error", err.to_string().replace('\n', " "));
                    let mut buffer = Vec::new();
                    if csv::write_report(&mut buffer, &partial, seed, &hash).is_ok() {
                        let _ = write_output(Some(path), &buffer);
                    }
                }
            }
            Err(err)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
