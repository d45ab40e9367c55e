use std::path::PathBuf;

use clap::Args;
use xpct_core::tomo::fbp_reconstruct;
use xpct_core::{ContentKind, ProjectionSet};

use crate::config::{pick, require, RunConfig};
use crate::error::{CliError, CliResult};
use crate::files::{load, save};
use crate::Common;

#[derive(Args, Clone, Debug)]
pub struct ReconArgs {
    #[command(flatten)]
    pub common: Common,
    /// Retrieved phase stack.
    #[arg(long)]
    phase: Option<PathBuf>,
    /// Output delta volume stack.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Fail unless the phase stack holds exactly this many views.
    #[arg(long)]
    expected_views: Option<usize>,
}

pub fn run(args: &ReconArgs, config: &RunConfig) -> CliResult<()> {
    let c = &config.recon;
    let phase_path = require(pick(args.phase.clone(), &c.phase), "recon.phase")?;
    let output = require(pick(args.output.clone(), &c.output), "recon.output")?;
    let (header, phase) = load(&phase_path, &[ContentKind::Phase])?;
    if let Some(n) = pick(args.expected_views, &c.expected_views) {
        if phase.len() != n {
            return Err(CliError::validation(format!("expected {n} views, {} has {}", phase_path.display(), phase.len())));
        }
    }
    let geometry = header.geometry()?;
    let set = ProjectionSet::new(geometry.clone(), phase, None)?;
    let volume = fbp_reconstruct(&set)?;
    save(&volume.slices(), &geometry, ContentKind::DeltaVolume, &output)?;
    let shape = volume.shape();
    println!(
        "recon views={} volume={}x{}x{} output={}",
        geometry.n_views(),
        shape[0],
        shape[1],
        shape[2],
        output.display()
    );
    Ok(())
}
