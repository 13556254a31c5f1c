mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Failure, Global};
use crate::config::RunConfig;

/// Slot-waveguide mode solver, emitter coupling, geometry sweeps and
/// cavity-QED estimates.
#[derive(Debug, Parser)]
#[command(name = "slotqed", version, about)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps; overrides `sweep.threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Write one binary field dump per solved mode.
    #[arg(long, global = true)]
    dump_fields: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve guided modes and report n_eff, n_g, polarization and slot confinement.
    Solve,
    /// Dipole coupling: orientation table and displacement sweep.
    Coupling,
    /// Geometry optimization per material and band.
    Sweep,
    /// Cavity-QED figures of merit.
    Cqed,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .ok_or_else(|| Failure::config(anyhow::anyhow!("missing required flag `--config`")))?;
    let cfg = RunConfig::from_path(&path).map_err(|e| Failure::config(e.into()))?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let global = Global {
        out,
        threads: cli.threads,
        dump_fields: cli.dump_fields,
    };
    match cli.command {
        Command::Solve => commands::solve(&cfg, &global),
        Command::Coupling => commands::coupling(&cfg, &global),
        Command::Sweep => commands::sweep(&cfg, &global),
        Command::Cqed => commands::cqed(&cfg, &global),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
