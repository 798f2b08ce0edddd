mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::{RunConfig, SweepMode};
use crate::error::CliError;

/// Simulate a state-dependent delay oscillator, catalog its quantized
/// orbits and drive transitions between them.
#[derive(Debug, Parser)]
#[command(name = "megastable", version)]
struct Cli {
    /// Flat JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: $MEGASTABLE_OUT, then ./megastable-out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for catalogs and sweeps.
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,
    /// Omit timestamps so reruns produce identical files.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Also write the full trajectory (transition) or orbit traces (catalog).
    #[arg(long, global = true)]
    export_trajectory: bool,
    /// Skip the gnuplot scripts.
    #[arg(long, global = true)]
    no_plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one free run from a constant history and classify its orbit.
    Simulate,
    /// Measure orbits 0..=n_max and fit their energy levels.
    Catalog,
    /// Apply one pulse to a cataloged orbit.
    Transition,
    /// Run a pulse over a grid of frequencies, amplitudes or both.
    Sweep {
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
    },
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("MEGASTABLE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("megastable-out"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    }
    let dir = output_dir(&cli, &cfg);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    let stamp = (!cli.deterministic).then(|| {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        format!("generated at unix time {secs}")
    });
    let out = Output {
        dir,
        stamp,
        plot: !cli.no_plot && cfg.plot.unwrap_or(true),
    };
    let export = cli.export_trajectory || cfg.export_trajectory.unwrap_or(false);
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Catalog => commands::catalog(&cfg, &out, export),
        Command::Transition => commands::transition(&cfg, &out, export),
        Command::Sweep { mode } => {
            let mode = mode
                .or(cfg.mode)
                .ok_or_else(|| CliError::config("sweep needs --mode or a `mode` key"))?;
            commands::sweep(&cfg, &out, mode)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
