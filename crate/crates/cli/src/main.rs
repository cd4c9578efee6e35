//! `vfd`: batch runner for the very fast diffusion laboratory.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "vfd",
    version,
    about = "Run very fast diffusion experiments from a config file"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one initial datum; writes series.csv and summary.txt.
    Evolve { config: PathBuf },
    /// Co-evolve two data and check W2 contraction; writes contract.csv.
    Contract { config: PathBuf },
    /// Minimize the N-point energy for each N; writes quantize.csv.
    Quantize { config: PathBuf },
    /// Random Hessian lower-bound and finite-difference suites; writes hessian.csv.
    HessianCheck { config: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("VFD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("VFD_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

type Handler = fn(&Config, &Path) -> Result<(), CliError>;

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let (path, cmd): (&Path, Handler) = match &cli.command {
        Command::Evolve { config } => (config, commands::evolve_cmd),
        Command::Contract { config } => (config, commands::contract_cmd),
        Command::Quantize { config } => (config, commands::quantize_cmd),
        Command::HessianCheck { config } => (config, commands::hessian_cmd),
    };
    let cfg = Config::load(path)?;
    std::fs::create_dir_all(&cli.out)?;
    cmd(&cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vfd: {e}");
            e.exit_code()
        }
    }
}
