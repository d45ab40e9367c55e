use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use xpct_core::tomo::{project_phantom, simulate_scan};
use xpct_core::{ContentKind, Phantom, RealImage, Result as CoreResult};

use crate::config::{pick, require, RunConfig};
use crate::error::CliResult;
use crate::files::{create_dir, mask_slices, save, write_text};
use crate::Common;

#[derive(Args, Clone, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Phantom description (`[[sphere]]` tables).
    #[arg(long)]
    phantom: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    supersample: Option<usize>,
    #[arg(long)]
    noise_pct: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    energy_kev: Option<f64>,
    #[arg(long)]
    pixel_um: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    distances_mm: Option<Vec<f64>>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    views: Option<usize>,
}

pub fn run(args: &SimulateArgs, config: &RunConfig) -> CliResult<()> {
    let c = &config.simulate;
    let mut gc = config.geometry.clone();
    gc.energy_kev = pick(args.energy_kev, &gc.energy_kev);
    gc.pixel_um = pick(args.pixel_um, &gc.pixel_um);
    gc.distances_mm = pick(args.distances_mm.clone(), &gc.distances_mm);
    gc.rows = pick(args.rows, &gc.rows);
    gc.cols = pick(args.cols, &gc.cols);
    gc.views = pick(args.views, &gc.views);
    let geometry = gc.to_geometry()?;

    let phantom = Phantom::load(&require(pick(args.phantom.clone(), &c.phantom), "simulate.phantom")?)?;
    let out = require(pick(args.output_dir.clone(), &c.output_dir), "simulate.output_dir")?;
    let supersample = pick(args.supersample, &c.supersample).unwrap_or(4);
    let noise_pct = pick(args.noise_pct, &c.noise_pct).unwrap_or(0.1);
    let seed = pick(args.seed, &c.seed).unwrap_or(0);
    let margin = c.mask_margin_px.unwrap_or(2.0) * geometry.pixel_width_m;
    let fov = c.background_fov.unwrap_or(0.9);
    if !(noise_pct >= 0.0 && noise_pct.is_finite()) {
        return Err(crate::error::CliError::validation(format!("noise_pct must be non-negative, got {noise_pct}")));
    }

    let measured = simulate_scan(&phantom, &geometry, supersample, noise_pct, seed)?;
    let truth: Vec<(RealImage, RealImage)> = (0..geometry.n_views())
        .into_par_iter()
        .map(|v| project_phantom(&phantom, &geometry, v, supersample))
        .collect::<CoreResult<_>>()?;

    create_dir(&out)?;
    for (l, &r) in geometry.distances_m.iter().enumerate() {
        let images: Vec<RealImage> = measured.iter().map(|view| view[l].clone()).collect();
        let g = geometry.with_distances(vec![r])?;
        save(&images, &g, ContentKind::SqrtNormalized, &out.join(format!("measured_d{l}.toml")))?;
    }
    let (absorption, phase): (Vec<_>, Vec<_>) = truth.into_iter().unzip();
    save(&phase, &geometry, ContentKind::Phase, &out.join("truth_phase.toml"))?;
    save(&absorption, &geometry, ContentKind::Absorption, &out.join("truth_absorption.toml"))?;
    let volume = phantom.truth_volume(&geometry);
    save(&volume.slices(), &geometry, ContentKind::DeltaVolume, &out.join("truth_delta.toml"))?;

    let mut masks = Vec::new();
    if !phantom.spheres.is_empty() {
        masks.push(("mask_foreground".to_string(), phantom.foreground_mask(&geometry)?));
        for (i, s) in phantom.spheres.iter().enumerate() {
            // Spheres smaller than the margin have no interior voxels.
            if let Ok(m) = phantom.interior_mask(&geometry, i, margin) {
                masks.push((format!("mask_interior_{i}_{}", sanitize(&s.material.name)), m));
            }
        }
    }
    masks.push(("mask_background".to_string(), phantom.background_mask(&geometry, margin, fov)?));
    for (name, mask) in &masks {
        save(&mask_slices(mask), &geometry, ContentKind::Mask, &out.join(format!("{name}.toml")))?;
    }
    write_text(&out.join("phantom.toml"), &phantom.to_toml_string())?;

    println!(
        "simulate views={} distances={} rows={} cols={} supersample={supersample} noise_pct={noise_pct} seed={seed} spheres={} output={}",
        geometry.n_views(),
        geometry.n_distances(),
        geometry.n_rows,
        geometry.n_cols,
        phantom.spheres.len(),
        out.display()
    );
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
