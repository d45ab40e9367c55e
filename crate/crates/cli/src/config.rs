//! Run configuration file. One TOML file holds a section per command;
//! command-line flags override individual keys. Relative paths inside the
//! file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use xpct_core::geometry::{equally_spaced_angles, wavelength_from_energy_ev};
use xpct_core::nlpr::ConstraintMode;
use xpct_core::pipeline::{InitKind, Method};
use xpct_core::ScanGeometry;

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: Option<u32>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub normalize: NormalizeConfig,
    #[serde(default)]
    pub retrieve: RetrieveConfig,
    #[serde(default)]
    pub recon: ReconConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub energy_kev: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub pixel_um: Option<f64>,
    pub distances_mm: Option<Vec<f64>>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub views: Option<usize>,
    /// Angular range covered by the equally spaced views.
    pub span_deg: Option<f64>,
}

impl GeometryConfig {
    pub fn to_geometry(&self) -> CliResult<ScanGeometry> {
        let missing = |key: &str| CliError::validation(format!("geometry.{key} is required"));
        let wavelength = match (self.wavelength_m, self.energy_kev) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation("give geometry.energy_kev or geometry.wavelength_m, not both"))
            }
            (Some(w), None) => w,
            (None, Some(e)) => wavelength_from_energy_ev(1e3 * e),
            (None, None) => return Err(missing("energy_kev")),
        };
        let pixel = self.pixel_um.ok_or_else(|| missing("pixel_um"))? * 1e-6;
        let distances = self
            .distances_mm
            .as_ref()
            .ok_or_else(|| missing("distances_mm"))?
            .iter()
            .map(|d| d * 1e-3)
            .collect();
        let rows = self.rows.ok_or_else(|| missing("rows"))?;
        let cols = self.cols.ok_or_else(|| missing("cols"))?;
        let views = self.views.ok_or_else(|| missing("views"))?;
        let span = self.span_deg.unwrap_or(180.0).to_radians();
        Ok(ScanGeometry::new(wavelength, pixel, distances, rows, cols, equally_spaced_angles(views, span))?)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub phantom: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub supersample: Option<usize>,
    pub noise_pct: Option<f64>,
    pub seed: Option<u64>,
    /// Distance between mask boundaries and sphere surfaces, in pixels.
    pub mask_margin_px: Option<f64>,
    /// Radius of the background mask as a fraction of the field of view.
    pub background_fov: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeConfig {
    pub raw: Option<PathBuf>,
    pub bright: Option<PathBuf>,
    pub dark: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveConfig {
    /// One stack per propagation distance.
    pub inputs: Option<Vec<PathBuf>>,
    pub output_dir: Option<PathBuf>,
    /// Expected distances; checked against the stack headers.
    pub distances_mm: Option<Vec<f64>>,
    pub method: Option<Method>,
    pub init: Option<InitKind>,
    pub constraint: Option<ConstraintMode>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub t_low: Option<f64>,
    pub nu: Option<f64>,
    pub alpha_prime: Option<f64>,
    pub paganin_distance_index: Option<usize>,
    pub history: Option<usize>,
    pub max_iters: Option<usize>,
    pub m_consecutive: Option<usize>,
    pub obj_tol_pct: Option<f64>,
    pub recon_tol_pct: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub phase: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub expected_views: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub estimate: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub foreground_mask: Option<PathBuf>,
    pub background_mask: Option<PathBuf>,
    pub material_masks: Option<Vec<PathBuf>>,
    pub nrmse: Option<bool>,
    pub ssim: Option<bool>,
    pub output: Option<PathBuf>,
    pub mtf: Option<MtfConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtfConfig {
    pub slice: usize,
    /// `[row, col]` in pixels.
    pub center: [f64; 2],
    pub radius_px: f64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        match config.version {
            Some(CONFIG_VERSION) => {}
            Some(v) => {
                return Err(CliError::validation(format!(
                    "{}: unsupported config version {v} (expected {CONFIG_VERSION})",
                    path.display()
                )))
            }
            None => return Err(CliError::validation(format!("{}: missing `version`", path.display()))),
        }
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                *path = base.join(&*path);
            }
        };
        let fix_all = |p: &mut Option<Vec<PathBuf>>| {
            for path in p.iter_mut().flatten() {
                *path = base.join(&*path);
            }
        };
        fix(&mut self.simulate.phantom);
        fix(&mut self.simulate.output_dir);
        fix(&mut self.normalize.raw);
        fix(&mut self.normalize.bright);
        fix(&mut self.normalize.dark);
        fix(&mut self.normalize.output);
        fix_all(&mut self.retrieve.inputs);
        fix(&mut self.retrieve.output_dir);
        fix(&mut self.recon.phase);
        fix(&mut self.recon.output);
        fix(&mut self.metrics.estimate);
        fix(&mut self.metrics.truth);
        fix(&mut self.metrics.foreground_mask);
        fix(&mut self.metrics.background_mask);
        fix_all(&mut self.metrics.material_masks);
        fix(&mut self.metrics.output);
        if let Some(mtf) = &mut self.metrics.mtf {
            fix(&mut mtf.output);
        }
    }
}

/// Flag value if given, else the config value.
pub fn pick<T>(flag: Option<T>, config: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| config.clone())
}

pub fn require<T>(value: Option<T>, key: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::validation(format!("missing required setting `{key}`")))
}
