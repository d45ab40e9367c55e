mod config;
mod error;
mod files;
mod metrics;
mod normalize;
mod recon;
mod retrieve;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};

/// Simulation, phase retrieval, reconstruction and evaluation for
/// propagation-based X-ray phase-contrast tomography.
#[derive(Parser)]
#[command(name = "xpct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the per-view loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate measurements and ground truth for a sphere phantom.
    Simulate(simulate::SimulateArgs),
    /// Convert raw, bright and dark stacks to normalized amplitudes.
    Normalize(normalize::NormalizeArgs),
    /// Retrieve phase and absorption for every view.
    Retrieve(retrieve::RetrieveArgs),
    /// Reconstruct the delta volume from retrieved phase.
    Recon(recon::ReconArgs),
    /// Score a reconstructed volume.
    Metrics(metrics::MetricsArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Normalize(a) => &a.common,
            Command::Retrieve(a) => &a.common,
            Command::Recon(a) => &a.common,
            Command::Metrics(a) => &a.common,
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let common = cli.command.common();
    let config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = common.threads.or(config.threads);
    let work = || match &cli.command {
        Command::Simulate(a) => simulate::run(a, &config),
        Command::Normalize(a) => normalize::run(a, &config),
        Command::Retrieve(a) => retrieve::run(a, &config),
        Command::Recon(a) => recon::run(a, &config),
        Command::Metrics(a) => metrics::run(a, &config),
    };
    match threads {
        Some(0) => Err(CliError::validation("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::validation(format!("cannot start {n} threads: {e}")))?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xpct: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
