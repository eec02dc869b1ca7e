use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rydent_cli::{error_kind, pipeline, RunConfig};

#[derive(Parser)]
#[command(
    name = "rydent",
    version,
    about = "Kicked angular-momentum dynamics and electron-core entanglement datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`block.key = value` lines); defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the classical ensembles, overriding `numerical.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Surfaces of section for both cases at every configured k.
    Sos,
    /// Eigenstate spectra and channel data.
    Spectrum,
    /// Mean and rms stationary linear entropy against k.
    StaticEntropy,
    /// Short- and long-time entropy traces with diagnostics.
    TimeEntropy,
    /// Everything above.
    All,
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.numerical.seed = seed;
    }
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let written = match cli.command {
        Command::Sos => pipeline::cmd_sos(&cfg)?,
        Command::Spectrum => pipeline::cmd_spectrum(&cfg)?,
        Command::StaticEntropy => pipeline::cmd_static_entropy(&cfg)?,
        Command::TimeEntropy => pipeline::cmd_time_entropy(&cfg)?,
        Command::All => pipeline::cmd_all(&cfg)?,
    };
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": error_kind(&err),
                "message": format!("{err:#}"),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
