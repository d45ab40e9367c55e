use std::path::PathBuf;

use clap::Args;
use xpct_core::linpr::{normalize, NormalizationInputs};
use xpct_core::{ContentKind, RealImage};

use crate::config::{pick, require, RunConfig};
use crate::error::{CliError, CliResult};
use crate::files::{load, save};
use crate::Common;

#[derive(Args, Clone, Debug)]
pub struct NormalizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Flat field: one image, or one per view.
    #[arg(long)]
    bright: Option<PathBuf>,
    /// Dark field: one image, or one per view.
    #[arg(long)]
    dark: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn run(args: &NormalizeArgs, config: &RunConfig) -> CliResult<()> {
    let c = &config.normalize;
    let raw_path = require(pick(args.raw.clone(), &c.raw), "normalize.raw")?;
    let bright_path = require(pick(args.bright.clone(), &c.bright), "normalize.bright")?;
    let dark_path = require(pick(args.dark.clone(), &c.dark), "normalize.dark")?;
    let output = require(pick(args.output.clone(), &c.output), "normalize.output")?;

    let (header, raw) = load(&raw_path, &[ContentKind::Intensity])?;
    let (_, bright) = load(&bright_path, &[ContentKind::Intensity])?;
    let (_, dark) = load(&dark_path, &[ContentKind::Intensity])?;
    let pick_view = |stack: &[RealImage], v: usize, what: &str| -> CliResult<RealImage> {
        match stack.len() {
            1 => Ok(stack[0].clone()),
            n if n == raw.len() => Ok(stack[v].clone()),
            n => Err(CliError::validation(format!(
                "{what} stack has {n} images for {} raw views",
                raw.len()
            ))),
        }
    };
    let mut out = Vec::with_capacity(raw.len());
    for (v, image) in raw.iter().enumerate() {
        out.push(normalize(&NormalizationInputs {
            raw: image.clone(),
            bright: pick_view(&bright, v, "bright")?,
            dark: pick_view(&dark, v, "dark")?,
        })?);
    }
    save(&out, &header.geometry()?, ContentKind::SqrtNormalized, &output)?;
    println!("normalize views={} output={}", out.len(), output.display());
    Ok(())
}
