//! Row-major 2D sample grids.
//!
//! [`RealImage`] carries detector images, phase and absorption maps and the
//! constrained `z` field; [`ComplexField`] carries transmission functions and
//! propagated wavefields. Both validate their shape and finiteness when built
//! from external data; the in-crate numerical code works on the raw slices.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    rows: usize,
    cols: usize,
    samples: Vec<f64>,
}

impl RealImage {
    /// Builds an image from row-major samples, rejecting a wrong sample count
    /// or any non-finite value.
    pub fn new(rows: usize, cols: usize, samples: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, samples.len())?;
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            samples,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        Self {
            rows,
            cols,
            samples: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        let mut samples = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                samples.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            samples,
        }
    }

    /// Wraps samples produced by trusted in-crate arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, samples: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, samples.len());
        Self {
            rows,
            cols,
            samples,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.samples[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Index of the first non-finite sample, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.samples.iter().position(|v| !v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &RealImage) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    rows: usize,
    cols: usize,
    samples: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(rows: usize, cols: usize, samples: Vec<Complex64>) -> Result<Self> {
        check_shape(rows, cols, samples.len())?;
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            samples,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: Complex64) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        Self {
            rows,
            cols,
            samples: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        let mut samples = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                samples.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            samples,
        }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(rows * cols, samples.len());
        Self {
            rows,
            cols,
            samples,
        }
    }

    /// Transmission `exp(-A - i phi)` from absorption and phase images.
    pub fn transmission(absorption: &RealImage, phase: &RealImage) -> Result<Self> {
        if absorption.dims() != phase.dims() {
            return Err(Error::DimensionMismatch(format!(
                "absorption {:?} vs phase {:?}",
                absorption.dims(),
                phase.dims()
            )));
        }
        let samples = absorption
            .as_slice()
            .iter()
            .zip(phase.as_slice())
            .map(|(&a, &p)| Complex64::new(-a, -p).exp())
            .collect();
        Ok(Self::from_raw(absorption.rows(), absorption.cols(), samples))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.samples[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage::from_raw(
            self.rows,
            self.cols,
            self.samples.iter().map(|v| v.norm()).collect(),
        )
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.samples.iter().position(|v| !v.is_finite())
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if rows * cols != len {
        return Err(Error::DimensionMismatch(format!(
            "{rows}x{cols} grid needs {} samples, got {len}",
            rows * cols
        )));
    }
    Ok(())
}
