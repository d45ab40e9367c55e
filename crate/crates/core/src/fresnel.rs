//! Discrete Fresnel propagation and the noiseless forward models.
//!
//! A field on the nominal `rows x cols` detector grid is edge-padded, taken
//! to DFT space, multiplied by the chirp
//! `H(p,q) = exp(-i pi lambda R (p^2 dmu^2 + q^2 dnu^2))` sampled on the
//! padded grid, transformed back and cropped.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_frequency, Fft2};
use crate::geometry::ScanGeometry;
use crate::image::{ComplexField, RealImage};

/// Edge-replicate padding applied on every side of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PaddingSpec {
    pub pad_rows: usize,
    pub pad_cols: usize,
}

impl PaddingSpec {
    pub fn new(pad_rows: usize, pad_cols: usize) -> Self {
        Self { pad_rows, pad_cols }
    }

    pub fn none() -> Self {
        Self::new(0, 0)
    }

    /// Half of the image dimension on each side, doubling the grid.
    pub fn half(rows: usize, cols: usize) -> Self {
        Self::new(rows / 2, cols / 2)
    }

    pub fn for_geometry(geometry: &ScanGeometry) -> Self {
        Self::half(geometry.n_rows, geometry.n_cols)
    }

    /// Same relative padding on a grid `factor` times finer.
    pub fn scaled(&self, factor: usize) -> Self {
        Self::new(self.pad_rows * factor, self.pad_cols * factor)
    }

    pub fn padded_dims(&self, rows: usize, cols: usize) -> (usize, usize) {
        (rows + 2 * self.pad_rows, cols + 2 * self.pad_cols)
    }
}

pub(crate) fn pad_edge<T: Copy>(samples: &[T], rows: usize, cols: usize, padding: PaddingSpec) -> Vec<T> {
    let (prows, pcols) = padding.padded_dims(rows, cols);
    let mut out = Vec::with_capacity(prows * pcols);
    for pr in 0..prows {
        let r = pr.saturating_sub(padding.pad_rows).min(rows - 1);
        let src = &samples[r * cols..(r + 1) * cols];
        for pc in 0..pcols {
            let c = pc.saturating_sub(padding.pad_cols).min(cols - 1);
            out.push(src[c]);
        }
    }
    out
}

/// Adjoint of [`pad_edge`]: every padded sample is folded back onto the
/// nominal pixel it was copied from.
pub(crate) fn pad_edge_adjoint(
    padded: &[Complex64],
    rows: usize,
    cols: usize,
    padding: PaddingSpec,
) -> Vec<Complex64> {
    let (prows, pcols) = padding.padded_dims(rows, cols);
    debug_assert_eq!(padded.len(), prows * pcols);
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for pr in 0..prows {
        let r = pr.saturating_sub(padding.pad_rows).min(rows - 1);
        for pc in 0..pcols {
            let c = pc.saturating_sub(padding.pad_cols).min(cols - 1);
            out[r * cols + c] += padded[pr * pcols + pc];
        }
    }
    out
}

pub(crate) fn crop<T: Copy>(padded: &[T], rows: usize, cols: usize, padding: PaddingSpec) -> Vec<T> {
    let (_, pcols) = padding.padded_dims(rows, cols);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let start = (r + padding.pad_rows) * pcols + padding.pad_cols;
        out.extend_from_slice(&padded[start..start + cols]);
    }
    out
}

/// Fresnel transfer function on a padded DFT grid.
#[derive(Clone, Debug)]
pub struct TransferFunction {
    pub field: ComplexField,
    pub distance_m: f64,
    pub padded_rows: usize,
    pub padded_cols: usize,
}

impl TransferFunction {
    /// Chirp for an arbitrary (possibly negative) distance. Negative
    /// distances back-propagate and are only meant for round-trip checks.
    pub fn new(
        wavelength_m: f64,
        pixel_width_m: f64,
        padded_rows: usize,
        padded_cols: usize,
        distance_m: f64,
    ) -> Self {
        let d_mu = 1.0 / (padded_cols as f64 * pixel_width_m);
        let d_nu = 1.0 / (padded_rows as f64 * pixel_width_m);
        let scale = -PI * wavelength_m * distance_m;
        let col_terms: Vec<f64> = (0..padded_cols)
            .map(|q| (signed_frequency(q, padded_cols) * d_mu).powi(2))
            .collect();
        let field = ComplexField::from_fn(padded_rows, padded_cols, |p, q| {
            let row_term = (signed_frequency(p, padded_rows) * d_nu).powi(2);
            Complex64::from_polar(1.0, scale * (row_term + col_terms[q]))
        });
        Self {
            field,
            distance_m,
            padded_rows,
            padded_cols,
        }
    }

    pub(crate) fn samples(&self) -> &[Complex64] {
        self.field.as_slice()
    }
}

pub fn build_transfer(
    geometry: &ScanGeometry,
    distance_index: usize,
    padding: PaddingSpec,
) -> Result<TransferFunction> {
    let distance = *geometry.distances_m.get(distance_index).ok_or_else(|| {
        Error::InvalidParameter(format!("distance index {distance_index} out of range"))
    })?;
    let (prows, pcols) = padding.padded_dims(geometry.n_rows, geometry.n_cols);
    Ok(TransferFunction::new(
        geometry.wavelength_m,
        geometry.pixel_width_m,
        prows,
        pcols,
        distance,
    ))
}

/// Propagates a field that already lives on the padded grid; no cropping.
pub fn propagate_padded(padded: &ComplexField, transfer: &TransferFunction) -> Result<ComplexField> {
    if padded.dims() != (transfer.padded_rows, transfer.padded_cols) {
        return Err(Error::DimensionMismatch(format!(
            "padded field {:?} vs transfer {:?}",
            padded.dims(),
            (transfer.padded_rows, transfer.padded_cols)
        )));
    }
    let fft = Fft2::new(transfer.padded_rows, transfer.padded_cols);
    let mut buf = padded.as_slice().to_vec();
    fft.forward(&mut buf);
    for (v, h) in buf.iter_mut().zip(transfer.samples()) {
        *v *= h;
    }
    fft.inverse(&mut buf);
    Ok(ComplexField::from_raw(transfer.padded_rows, transfer.padded_cols, buf))
}

pub fn edge_pad(field: &ComplexField, padding: PaddingSpec) -> ComplexField {
    let (prows, pcols) = padding.padded_dims(field.rows(), field.cols());
    ComplexField::from_raw(
        prows,
        pcols,
        pad_edge(field.as_slice(), field.rows(), field.cols(), padding),
    )
}

/// `crop(IDFT(H * DFT(pad(field))))`.
pub fn propagate(
    exit_field: &ComplexField,
    transfer: &TransferFunction,
    padding: PaddingSpec,
) -> Result<ComplexField> {
    let (rows, cols) = exit_field.dims();
    if padding.padded_dims(rows, cols) != (transfer.padded_rows, transfer.padded_cols) {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} field with {padding:?} does not match a {}x{} transfer function",
            transfer.padded_rows, transfer.padded_cols
        )));
    }
    let out = propagate_padded(&edge_pad(exit_field, padding), transfer)?;
    Ok(ComplexField::from_raw(rows, cols, crop(out.as_slice(), rows, cols, padding)))
}

/// Forward operator for one geometry: planned FFT plus one transfer
/// function per distance. Immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct FresnelModel {
    rows: usize,
    cols: usize,
    padding: PaddingSpec,
    fft: Fft2,
    transfers: Vec<TransferFunction>,
}

impl FresnelModel {
    pub fn new(geometry: &ScanGeometry, padding: PaddingSpec) -> Result<Self> {
        geometry.validate()?;
        let (prows, pcols) = padding.padded_dims(geometry.n_rows, geometry.n_cols);
        let transfers = (0..geometry.n_distances())
            .map(|l| build_transfer(geometry, l, padding))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows: geometry.n_rows,
            cols: geometry.n_cols,
            padding,
            fft: Fft2::new(prows, pcols),
            transfers,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn padding(&self) -> PaddingSpec {
        self.padding
    }

    pub fn n_distances(&self) -> usize {
        self.transfers.len()
    }

    pub fn transfers(&self) -> &[TransferFunction] {
        &self.transfers
    }

    pub(crate) fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub(crate) fn check_dims(&self, dims: (usize, usize), what: &str) -> Result<()> {
        if dims != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "{what} is {dims:?}, geometry expects {:?}",
                (self.rows, self.cols)
            )));
        }
        Ok(())
    }

    /// DFT of the edge-padded field.
    pub(crate) fn padded_spectrum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = pad_edge(x, self.rows, self.cols, self.padding);
        self.fft.forward(&mut buf);
        buf
    }

    /// Detector-plane field at distance `l`, cropped to the nominal grid,
    /// given the padded spectrum of the exit field.
    pub(crate) fn detector_field(&self, spectrum: &[Complex64], l: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .zip(self.transfers[l].samples())
            .map(|(s, h)| s * h)
            .collect();
        self.fft.inverse(&mut buf);
        crop(&buf, self.rows, self.cols, self.padding)
    }

    /// `|H_l x|` for every distance.
    pub fn forward(&self, x: &ComplexField) -> Result<Vec<RealImage>> {
        self.check_dims(x.dims(), "transmission field")?;
        let spectrum = self.padded_spectrum(x.as_slice());
        Ok((0..self.n_distances())
            .map(|l| {
                let g = self.detector_field(&spectrum, l);
                RealImage::from_raw(self.rows, self.cols, g.iter().map(|v| v.norm()).collect())
            })
            .collect())
    }

    /// Intensity `|H_l x|^2` at distance `l` only.
    pub fn intensity(&self, x: &ComplexField, l: usize) -> Result<RealImage> {
        self.check_dims(x.dims(), "transmission field")?;
        let spectrum = self.padded_spectrum(x.as_slice());
        let g = self.detector_field(&spectrum, l);
        Ok(RealImage::from_raw(
            self.rows,
            self.cols,
            g.iter().map(|v| v.norm_sqr()).collect(),
        ))
    }
}

/// `z^(alpha + i gamma)` element-wise; every `z` sample must be positive.
pub fn constrained_transmission(z: &RealImage, alpha: f64, gamma: f64) -> Result<ComplexField> {
    let exponent = Complex64::new(alpha, gamma);
    let mut samples = Vec::with_capacity(z.len());
    for (index, &v) in z.as_slice().iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::Domain {
                what: "non-positive z sample",
                index,
            });
        }
        samples.push((exponent * v.ln()).exp());
    }
    Ok(ComplexField::from_raw(z.rows(), z.cols(), samples))
}

pub fn forward_unconstrained(
    x: &ComplexField,
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<Vec<RealImage>> {
    FresnelModel::new(geometry, padding)?.forward(x)
}

pub fn forward_constrained(
    z: &RealImage,
    alpha: f64,
    gamma: f64,
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<Vec<RealImage>> {
    let x = constrained_transmission(z, alpha, gamma)?;
    forward_unconstrained(&x, geometry, padding)
}
