//! Data normalization and the linear phase-retrieval initializers.
//!
//! - [`normalize`]: square root of the flat/dark corrected detector image.
//! - [`Paganin`]: single-distance retrieval under the single-material
//!   assumption.
//! - [`Ctf`]: multi-distance weak-object (contrast transfer function)
//!   retrieval with the `2 nu (BC - A^2)` regularization rule.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_frequency, Fft2};
use crate::fresnel::{crop, pad_edge, PaddingSpec};
use crate::geometry::{MaterialModel, ScanGeometry};
use crate::image::RealImage;

/// Default `nu` of the fixed CTF regularization rule.
pub const DEFAULT_CTF_NU: f64 = 1e-8;

/// Floor applied to the Paganin-filtered intensity inside the logarithm.
pub const PAGANIN_INTENSITY_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct NormalizationInputs {
    pub raw: RealImage,
    pub bright: RealImage,
    pub dark: RealImage,
}

/// `y = sqrt((raw - dark) / (bright - dark))`, with negative numerators
/// clamped to zero.
pub fn normalize(inputs: &NormalizationInputs) -> Result<RealImage> {
    let dims = inputs.raw.dims();
    if inputs.bright.dims() != dims || inputs.dark.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "raw {dims:?}, bright {:?}, dark {:?}",
            inputs.bright.dims(),
            inputs.dark.dims()
        )));
    }
    let mut out = Vec::with_capacity(inputs.raw.len());
    for (index, ((&y, &b), &d)) in inputs
        .raw
        .as_slice()
        .iter()
        .zip(inputs.bright.as_slice())
        .zip(inputs.dark.as_slice())
        .enumerate()
    {
        let flat = b - d;
        if !(flat > 0.0) {
            return Err(Error::Domain {
                what: "bright field not above dark field",
                index,
            });
        }
        out.push(((y - d).max(0.0) / flat).sqrt());
    }
    Ok(RealImage::from_raw(dims.0, dims.1, out))
}

/// Squared continuous frequency `mu^2 + nu^2` of every bin of a padded grid.
fn frequency_radius_sq(prows: usize, pcols: usize, pixel_width_m: f64) -> Vec<f64> {
    let d_mu = 1.0 / (pcols as f64 * pixel_width_m);
    let d_nu = 1.0 / (prows as f64 * pixel_width_m);
    let mut out = Vec::with_capacity(prows * pcols);
    for p in 0..prows {
        let nu = signed_frequency(p, prows) * d_nu;
        for q in 0..pcols {
            let mu = signed_frequency(q, pcols) * d_mu;
            out.push(mu * mu + nu * nu);
        }
    }
    out
}

/// Planned Paganin filter for one geometry, distance and material.
#[derive(Clone, Debug)]
pub struct Paganin {
    rows: usize,
    cols: usize,
    padding: PaddingSpec,
    fft: Fft2,
    filter: Vec<f64>,
    mu_a: f64,
    wavenumber: f64,
    delta: f64,
}

impl Paganin {
    pub fn new(
        geometry: &ScanGeometry,
        distance_index: usize,
        material: &MaterialModel,
        padding: PaddingSpec,
    ) -> Result<Self> {
        let distance = *geometry.distances_m.get(distance_index).ok_or_else(|| {
            Error::InvalidParameter(format!("distance index {distance_index} out of range"))
        })?;
        Self::at_distance(geometry, distance, material, padding)
    }

    /// Filter for an arbitrary assumed distance, which may differ from the
    /// distance the data was acquired at.
    pub fn at_distance(
        geometry: &ScanGeometry,
        distance_m: f64,
        material: &MaterialModel,
        padding: PaddingSpec,
    ) -> Result<Self> {
        material.validate()?;
        if !(material.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Paganin retrieval needs beta > 0 ({} has beta = {})",
                material.name, material.beta
            )));
        }
        let mu_a = 4.0 * PI * material.beta / geometry.wavelength_m;
        let (prows, pcols) = padding.padded_dims(geometry.n_rows, geometry.n_cols);
        let coeff = 4.0 * PI * PI * distance_m * material.delta / mu_a;
        let filter = frequency_radius_sq(prows, pcols, geometry.pixel_width_m)
            .into_iter()
            .map(|f2| 1.0 / (1.0 + coeff * f2))
            .collect();
        Ok(Self {
            rows: geometry.n_rows,
            cols: geometry.n_cols,
            padding,
            fft: Fft2::new(prows, pcols),
            filter,
            mu_a,
            wavenumber: geometry.wavenumber(),
            delta: material.delta,
        })
    }

    /// Projected thickness `T` of the assumed material.
    pub fn thickness(&self, y: &RealImage) -> Result<RealImage> {
        if y.dims() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "image {:?}, geometry {:?}",
                y.dims(),
                (self.rows, self.cols)
            )));
        }
        let intensity: Vec<Complex64> = y
            .as_slice()
            .iter()
            .map(|v| Complex64::new(v * v, 0.0))
            .collect();
        let mut buf = pad_edge(&intensity, self.rows, self.cols, self.padding);
        self.fft.forward(&mut buf);
        for (v, f) in buf.iter_mut().zip(&self.filter) {
            *v *= f;
        }
        self.fft.inverse(&mut buf);
        let cropped = crop(&buf, self.rows, self.cols, self.padding);
        let mut t = Vec::with_capacity(cropped.len());
        for (index, v) in cropped.iter().enumerate() {
            let value = -v.re.max(PAGANIN_INTENSITY_FLOOR).ln() / self.mu_a;
            if !value.is_finite() {
                return Err(Error::Domain {
                    what: "non-finite Paganin thickness",
                    index,
                });
            }
            t.push(value);
        }
        Ok(RealImage::from_raw(self.rows, self.cols, t))
    }

    /// Absorption and phase images `(A, phi)`.
    pub fn retrieve(&self, y: &RealImage) -> Result<(RealImage, RealImage)> {
        let t = self.thickness(y)?;
        let a = t.map(|v| 0.5 * self.mu_a * v);
        let phi = t.map(|v| self.wavenumber * self.delta * v);
        Ok((a, phi))
    }
}

pub fn paganin_retrieve(
    y: &RealImage,
    geometry: &ScanGeometry,
    distance_index: usize,
    material: &MaterialModel,
    padding: PaddingSpec,
) -> Result<(RealImage, RealImage)> {
    Paganin::new(geometry, distance_index, material, padding)?.retrieve(y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CtfRegularization {
    /// `alpha'(f) = 2 nu (BC - A^2)`, plus `nu` at the DC bin where the
    /// system is singular.
    FixedRule { nu: f64 },
    /// Constant `alpha'` at every frequency.
    Explicit { alpha_prime: f64 },
}

impl Default for CtfRegularization {
    fn default() -> Self {
        CtfRegularization::FixedRule { nu: DEFAULT_CTF_NU }
    }
}

impl CtfRegularization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CtfRegularization::FixedRule { nu } if !(nu > 0.0 && nu.is_finite()) => Err(
                Error::InvalidParameter(format!("CTF nu must be positive, got {nu}")),
            ),
            CtfRegularization::Explicit { alpha_prime } if !(alpha_prime >= 0.0 && alpha_prime.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "CTF alpha' must be non-negative, got {alpha_prime}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Planned multi-distance CTF retrieval.
///
/// With `chi_l = pi lambda R_l |f|^2`, the weak-object intensity spectrum is
/// `D_l = -2 (cos chi_l A + sin chi_l phi)`, solved per frequency in the
/// least-squares sense.
#[derive(Clone, Debug)]
pub struct Ctf {
    rows: usize,
    cols: usize,
    padding: PaddingSpec,
    fft: Fft2,
    sin: Vec<Vec<f64>>,
    cos: Vec<Vec<f64>>,
    /// `A = sum s c`, `B = sum s^2`, `C = sum c^2` and the denominator.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    denom: Vec<f64>,
}

impl Ctf {
    pub fn new(geometry: &ScanGeometry, reg: CtfRegularization, padding: PaddingSpec) -> Result<Self> {
        reg.validate()?;
        if geometry.n_distances() < 2 {
            return Err(Error::InvalidParameter(
                "CTF retrieval needs at least two distances".into(),
            ));
        }
        let first = geometry.distances_m[0];
        if geometry.distances_m.iter().all(|&r| r == first) {
            return Err(Error::InvalidParameter(
                "CTF retrieval needs distinct distances".into(),
            ));
        }
        let (prows, pcols) = padding.padded_dims(geometry.n_rows, geometry.n_cols);
        let f2 = frequency_radius_sq(prows, pcols, geometry.pixel_width_m);
        let n = f2.len();
        let mut sin = Vec::with_capacity(geometry.n_distances());
        let mut cos = Vec::with_capacity(geometry.n_distances());
        for &r in &geometry.distances_m {
            let chi: Vec<f64> = f2.iter().map(|&f| PI * geometry.wavelength_m * r * f).collect();
            sin.push(chi.iter().map(|v| v.sin()).collect::<Vec<_>>());
            cos.push(chi.iter().map(|v| v.cos()).collect::<Vec<_>>());
        }
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for (s_l, c_l) in sin.iter().zip(&cos) {
            for k in 0..n {
                a[k] += s_l[k] * c_l[k];
                b[k] += s_l[k] * s_l[k];
                c[k] += c_l[k] * c_l[k];
            }
        }
        let denom = (0..n)
            .map(|k| {
                let det = b[k] * c[k] - a[k] * a[k];
                let alpha_prime = match reg {
                    CtfRegularization::FixedRule { nu } => {
                        2.0 * nu * det + if k == 0 { nu } else { 0.0 }
                    }
                    CtfRegularization::Explicit { alpha_prime } => alpha_prime,
                };
                2.0 * det + alpha_prime
            })
            .collect();
        Ok(Self {
            rows: geometry.n_rows,
            cols: geometry.n_cols,
            padding,
            fft: Fft2::new(prows, pcols),
            sin,
            cos,
            a,
            b,
            c,
            denom,
        })
    }

    pub fn retrieve(&self, y_list: &[RealImage]) -> Result<(RealImage, RealImage)> {
        if y_list.len() != self.sin.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images for {} distances",
                y_list.len(),
                self.sin.len()
            )));
        }
        let n = self.denom.len();
        let mut sum_sd = vec![Complex64::new(0.0, 0.0); n];
        let mut sum_cd = vec![Complex64::new(0.0, 0.0); n];
        for (l, y) in y_list.iter().enumerate() {
            if y.dims() != (self.rows, self.cols) {
                return Err(Error::DimensionMismatch(format!(
                    "image {l} is {:?}, geometry expects {:?}",
                    y.dims(),
                    (self.rows, self.cols)
                )));
            }
            let contrast: Vec<Complex64> = y
                .as_slice()
                .iter()
                .map(|v| Complex64::new(v * v - 1.0, 0.0))
                .collect();
            let mut d = pad_edge(&contrast, self.rows, self.cols, self.padding);
            self.fft.forward(&mut d);
            for k in 0..n {
                sum_sd[k] += d[k] * self.sin[l][k];
                sum_cd[k] += d[k] * self.cos[l][k];
            }
        }
        let mut phase = vec![Complex64::new(0.0, 0.0); n];
        let mut absorption = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let den = self.denom[k];
            if den == 0.0 {
                continue;
            }
            phase[k] = -(sum_sd[k] * self.c[k] - sum_cd[k] * self.a[k]) / den;
            absorption[k] = (sum_sd[k] * self.a[k] - sum_cd[k] * self.b[k]) / den;
        }
        self.fft.inverse(&mut phase);
        self.fft.inverse(&mut absorption);
        let real = |buf: &[Complex64]| {
            RealImage::from_raw(
                self.rows,
                self.cols,
                crop(buf, self.rows, self.cols, self.padding)
                    .iter()
                    .map(|v| v.re)
                    .collect(),
            )
        };
        let a = real(&absorption);
        let phi = real(&phase);
        if let Some(index) = phi.first_non_finite().or(a.first_non_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok((a, phi))
    }
}

pub fn ctf_retrieve(
    y_list: &[RealImage],
    geometry: &ScanGeometry,
    reg: CtfRegularization,
    padding: PaddingSpec,
) -> Result<(RealImage, RealImage)> {
    Ctf::new(geometry, reg, padding)?.retrieve(y_list)
}
