use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use xpct_core::analysis::{background_subtract, mtf_from_disc, nrmse, ssim};
use xpct_core::{MtfCurve, RegionMask};

use crate::config::{pick, require, MtfConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::files::{load_mask, load_volume, write_text};
use crate::Common;

#[derive(Args, Clone, Debug)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Reconstructed delta volume.
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Ground-truth delta volume.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Region scored by NRMSE and SSIM (default: whole volume).
    #[arg(long)]
    foreground_mask: Option<PathBuf>,
    /// Air region; its mean is removed before scoring.
    #[arg(long)]
    background_mask: Option<PathBuf>,
    /// Material interiors for background-subtracted delta (repeatable).
    #[arg(long = "material-mask", value_delimiter = ',')]
    material_masks: Option<Vec<PathBuf>>,
    /// Require NRMSE in the report.
    #[arg(long)]
    nrmse: bool,
    /// Require SSIM in the report.
    #[arg(long)]
    ssim: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, requires_all = ["mtf_center", "mtf_radius"])]
    mtf_slice: Option<usize>,
    /// Disc centre as `row,col` in pixels.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    mtf_center: Option<Vec<f64>>,
    #[arg(long)]
    mtf_radius: Option<f64>,
    #[arg(long)]
    mtf_output: Option<PathBuf>,
}

/// Frequency at which the curve first falls to one half.
fn mtf50(curve: &MtfCurve) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = curve.frequencies.iter().copied().zip(curve.values.iter().copied()).collect();
    pairs.windows(2).find(|w| w[1].1 <= 0.5).map(|w| {
        let ((f0, v0), (f1, v1)) = (w[0], w[1]);
        if v0 == v1 {
            f1
        } else {
            f0 + (v0 - 0.5) / (v0 - v1) * (f1 - f0)
        }
    })
}

pub fn run(args: &MetricsArgs, config: &RunConfig) -> CliResult<()> {
    let c = &config.metrics;
    let estimate_path = require(pick(args.estimate.clone(), &c.estimate), "metrics.estimate")?;
    let truth_path = pick(args.truth.clone(), &c.truth);
    let want_nrmse = args.nrmse || c.nrmse == Some(true);
    let want_ssim = args.ssim || c.ssim == Some(true);
    if truth_path.is_none() && (want_nrmse || want_ssim) {
        return Err(CliError::validation("NRMSE and SSIM need a truth volume"));
    }
    let material_paths = pick(args.material_masks.clone(), &c.material_masks).unwrap_or_default();
    let background_path = pick(args.background_mask.clone(), &c.background_mask);
    if !material_paths.is_empty() && background_path.is_none() {
        return Err(CliError::validation("background subtraction needs a background mask"));
    }

    let estimate = load_volume(&estimate_path)?;
    let shape = estimate.shape();
    let mut report = String::new();
    let _ = writeln!(report, "estimate={}", estimate_path.display());
    let _ = writeln!(report, "shape={}x{}x{}", shape[0], shape[1], shape[2]);

    let background = background_path.as_ref().map(|p| load_mask(p, &shape)).transpose()?;
    let offset = match &background {
        Some(bg) => {
            let off = bg.mean_of(estimate.as_slice())?;
            let _ = writeln!(report, "background_offset={off:e}");
            off
        }
        None => 0.0,
    };

    if let Some(truth_path) = &truth_path {
        let truth = load_volume(truth_path)?;
        if truth.shape() != shape {
            return Err(CliError::validation(format!(
                "truth shape {:?} does not match estimate shape {shape:?}",
                truth.shape()
            )));
        }
        let region = match pick(args.foreground_mask.clone(), &c.foreground_mask) {
            Some(p) => load_mask(&p, &shape)?,
            None => RegionMask::full(shape.clone(), "volume")?,
        };
        let shifted: Vec<f64> = estimate.as_slice().iter().map(|v| v - offset).collect();
        let _ = writeln!(report, "truth={}", truth_path.display());
        let _ = writeln!(report, "region={} voxels={}", region.label, region.count());
        let _ = writeln!(report, "nrmse={:e}", nrmse(&shifted, truth.as_slice(), &region)?);
        let _ = writeln!(report, "ssim={:.6}", ssim(&shifted, truth.as_slice(), &region)?);
    }

    if let Some(bg) = &background {
        for path in &material_paths {
            let mask = load_mask(path, &shape)?;
            let delta = background_subtract(estimate.as_slice(), &mask, bg)?;
            let _ = writeln!(report, "delta.{}={delta:e}", mask.label);
        }
    }

    let mtf = match (args.mtf_slice, &args.mtf_center, args.mtf_radius) {
        (Some(slice), Some(center), Some(radius_px)) => Some(MtfConfig {
            slice,
            center: [center[0], center[1]],
            radius_px,
            output: args.mtf_output.clone(),
        }),
        _ => c.mtf.clone(),
    };
    if let Some(m) = mtf {
        if m.slice >= shape[0] {
            return Err(CliError::validation(format!("MTF slice {} outside {} slices", m.slice, shape[0])));
        }
        let curve = mtf_from_disc(&estimate.slice(m.slice), (m.center[0], m.center[1]), m.radius_px)?;
        let path = pick(args.mtf_output.clone(), &m.output).unwrap_or_else(|| estimate_path.with_file_name("mtf.txt"));
        write_text(&path, &curve.to_text())?;
        let _ = writeln!(report, "mtf_curve={}", path.display());
        match mtf50(&curve) {
            Some(f) => {
                let _ = writeln!(report, "mtf50_cycles_per_px={f:.6}");
            }
            None => {
                let _ = writeln!(report, "mtf50_cycles_per_px=na");
            }
        }
    }

    print!("{report}");
    if let Some(path) = pick(args.output.clone(), &c.output) {
        write_text(&path, &report)?;
    }
    Ok(())
}
