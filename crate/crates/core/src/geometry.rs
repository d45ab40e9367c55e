//! Scan geometry and material description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `hc` in eV·m, used to convert photon energy to wavelength.
pub const HC_EV_M: f64 = 1.239_841_93e-6;

pub fn wavelength_from_energy_ev(energy_ev: f64) -> f64 {
    HC_EV_M / energy_ev
}

/// Acquisition geometry shared by every view of a scan.
///
/// `n_rows` runs along the rotation axis (`v`), `n_cols` across it (`u`).
/// View angles are in radians, counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGeometry {
    pub wavelength_m: f64,
    pub pixel_width_m: f64,
    pub distances_m: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub view_angles_rad: Vec<f64>,
}

impl ScanGeometry {
    pub fn new(
        wavelength_m: f64,
        pixel_width_m: f64,
        distances_m: Vec<f64>,
        n_rows: usize,
        n_cols: usize,
        view_angles_rad: Vec<f64>,
    ) -> Result<Self> {
        let g = Self {
            wavelength_m,
            pixel_width_m,
            distances_m,
            n_rows,
            n_cols,
            view_angles_rad,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGeometry(m));
        if !(self.wavelength_m.is_finite() && self.wavelength_m > 0.0) {
            return bad(format!("wavelength must be positive, got {}", self.wavelength_m));
        }
        if !(self.pixel_width_m.is_finite() && self.pixel_width_m > 0.0) {
            return bad(format!("pixel width must be positive, got {}", self.pixel_width_m));
        }
        if self.distances_m.is_empty() {
            return bad("at least one propagation distance is required".into());
        }
        for (i, &r) in self.distances_m.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("distance {i} must be non-negative, got {r}"));
            }
            if self.distances_m[..i].contains(&r) {
                return bad(format!("distance {r} m listed twice"));
            }
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return bad(format!("detector must be non-empty, got {}x{}", self.n_rows, self.n_cols));
        }
        if self.view_angles_rad.is_empty() {
            return bad("at least one view angle is required".into());
        }
        if let Some(i) = self.view_angles_rad.iter().position(|a| !a.is_finite()) {
            return bad(format!("view angle {i} is not finite"));
        }
        Ok(())
    }

    pub fn n_distances(&self) -> usize {
        self.distances_m.len()
    }

    pub fn n_views(&self) -> usize {
        self.view_angles_rad.len()
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_m
    }

    /// Copy of this geometry restricted to a subset of distances, in the
    /// given order.
    pub fn with_distances(&self, distances_m: Vec<f64>) -> Result<Self> {
        let g = Self {
            distances_m,
            ..self.clone()
        };
        g.validate()?;
        Ok(g)
    }

    /// Geometry of a grid sampled `factor` times more finely in each
    /// direction over the same field of view.
    pub fn supersampled(&self, factor: usize) -> Self {
        Self {
            pixel_width_m: self.pixel_width_m / factor as f64,
            n_rows: self.n_rows * factor,
            n_cols: self.n_cols * factor,
            ..self.clone()
        }
    }
}

/// `n` angles equally spaced over `[0, span)`.
pub fn equally_spaced_angles(n: usize, span_rad: f64) -> Vec<f64> {
    (0..n).map(|i| span_rad * i as f64 / n as f64).collect()
}

/// The pixel-scale Fresnel number `Δ² / (λ R)` at one distance.
pub fn fresnel_number(geometry: &ScanGeometry, distance_index: usize) -> Result<f64> {
    let r = *geometry.distances_m.get(distance_index).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "distance index {distance_index} out of range ({} distances)",
            geometry.n_distances()
        ))
    })?;
    if r == 0.0 {
        return Err(Error::InvalidParameter(
            "Fresnel number is undefined at zero propagation distance".into(),
        ));
    }
    Ok(geometry.pixel_width_m.powi(2) / (geometry.wavelength_m * r))
}

/// Complex refractive index `n = 1 - delta + i beta` of one material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub name: String,
    pub delta: f64,
    pub beta: f64,
}

impl MaterialModel {
    pub fn new(name: impl Into<String>, delta: f64, beta: f64) -> Result<Self> {
        let m = Self {
            name: name.into(),
            delta,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{}: delta must be finite and non-negative, got {}",
                self.name, self.delta
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{}: beta must be finite and non-negative, got {}",
                self.name, self.beta
            )));
        }
        if self.delta == 0.0 && self.beta == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{}: delta and beta cannot both be zero",
                self.name
            )));
        }
        Ok(())
    }

    pub fn delta_beta_ratio(&self) -> f64 {
        self.delta / self.beta
    }

    /// Same material with `delta` and `beta` multiplied by the given factors.
    pub fn scaled(&self, delta_factor: f64, beta_factor: f64) -> Self {
        Self {
            name: self.name.clone(),
            delta: self.delta * delta_factor,
            beta: self.beta * beta_factor,
        }
    }
}

/// Refractive indices at 20 keV of the materials used by the simulated
/// studies.
pub mod materials {
    use super::MaterialModel;

    pub fn silicon_carbide() -> MaterialModel {
        MaterialModel {
            name: "SiC".into(),
            delta: 1.67e-6,
            beta: 4.77e-9,
        }
    }

    pub fn teflon() -> MaterialModel {
        MaterialModel {
            name: "Teflon".into(),
            delta: 1.1e-6,
            beta: 9.09e-10,
        }
    }

    pub fn alumina() -> MaterialModel {
        MaterialModel {
            name: "Alumina".into(),
            delta: 2.03e-6,
            beta: 3.97e-9,
        }
    }

    pub fn polyimide() -> MaterialModel {
        MaterialModel {
            name: "Polyimide".into(),
            delta: 7.61e-7,
            beta: 3.21e-10,
        }
    }
}
