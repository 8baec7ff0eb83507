use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hyperent_cli::commands::{self, Common};

/// Digital twin of a time-bin / frequency-bin hyperentangled photon-pair source.
#[derive(Debug, Parser)]
#[command(name = "hyperent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory (default: run.output_dir, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample tomography, stabilizer and sweep counts into counts.csv / sweep.csv.
    Simulate,
    /// Reconstruct both marginals from counts.csv into reconstruction.json.
    Tomo,
    /// Figures of merit with Monte-Carlo error bars into metrics.json.
    Metrics,
    /// Summary table, density-matrix and fringe CSVs.
    Report,
    /// Phase sweeps only, with fitted visibilities.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
    };
    let result = match cli.command {
        Command::Simulate => commands::simulate(&common),
        Command::Tomo => commands::tomo(&common),
        Command::Metrics => commands::metrics(&common),
        Command::Report => commands::report(&common),
        Command::Sweep => commands::sweep(&common),
    };
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
