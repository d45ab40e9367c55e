use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::RealImage;

/// Boolean region over an image (`[rows, cols]`) or a volume
/// (`[slices, rows, cols]`), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    shape: Vec<usize>,
    inside: Vec<bool>,
    pub label: String,
}

impl RegionMask {
    pub fn new(shape: Vec<usize>, inside: Vec<bool>, label: impl Into<String>) -> Result<Self> {
        if !(shape.len() == 2 || shape.len() == 3) || shape.contains(&0) {
            return Err(Error::InvalidParameter(format!("mask shape {shape:?} must be 2D or 3D and non-empty")));
        }
        let n: usize = shape.iter().product();
        if inside.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "mask of shape {shape:?} needs {n} samples, got {}",
                inside.len()
            )));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::InvalidParameter("mask selects no samples".into()));
        }
        Ok(Self {
            shape,
            inside,
            label: label.into(),
        })
    }

    pub fn full(shape: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![true; n], label)
    }

    /// Samples above 0.5 are inside.
    pub fn from_samples(shape: Vec<usize>, samples: &[f64], label: impl Into<String>) -> Result<Self> {
        Self::new(shape, samples.iter().map(|&v| v > 0.5).collect(), label)
    }

    pub fn from_image(image: &RealImage, label: impl Into<String>) -> Result<Self> {
        Self::from_samples(vec![image.rows(), image.cols()], image.as_slice(), label)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn overlaps(&self, other: &RegionMask) -> bool {
        self.inside.iter().zip(&other.inside).any(|(a, b)| *a && *b)
    }

    /// 0/1 samples, e.g. for writing a mask stack.
    pub fn to_samples(&self) -> Vec<f64> {
        self.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    fn check_len(&self, n: usize, what: &str) -> Result<()> {
        if n != self.inside.len() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {n} samples, mask {:?} has {}",
                self.shape,
                self.inside.len()
            )));
        }
        Ok(())
    }

    fn masked<'a>(&'a self, data: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        data.iter().zip(&self.inside).filter(|(_, &m)| m).map(|(&v, _)| v)
    }

    pub fn mean_of(&self, data: &[f64]) -> Result<f64> {
        self.check_len(data.len(), "data")?;
        Ok(self.masked(data).sum::<f64>() / self.count() as f64)
    }
}

/// `sqrt(mean((e - t)^2)) / sqrt(mean(t^2))` over the mask.
pub fn nrmse(estimate: &[f64], truth: &[f64], mask: &RegionMask) -> Result<f64> {
    mask.check_len(estimate.len(), "estimate")?;
    mask.check_len(truth.len(), "truth")?;
    let mut err = 0.0;
    let mut norm = 0.0;
    for ((&e, &t), &m) in estimate.iter().zip(truth).zip(mask.as_slice()) {
        if m {
            err += (e - t) * (e - t);
            norm += t * t;
        }
    }
    if norm == 0.0 {
        return Err(Error::InvalidParameter("truth is zero on the mask; NRMSE undefined".into()));
    }
    Ok((err / norm).sqrt())
}

/// Gaussian window width used by [`ssim`].
pub const SSIM_SIGMA: f64 = 8.0;
const SSIM_TRUNCATE: f64 = 3.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// SSIM after mapping both inputs affinely so that the truth's minimum and
/// maximum (over the whole grid) land on -1 and 1. Volumes are filtered
/// slice by slice; the SSIM map is averaged over the mask.
pub fn ssim(estimate: &[f64], truth: &[f64], mask: &RegionMask) -> Result<f64> {
    mask.check_len(truth.len(), "truth")?;
    let lo = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ssim_with_range(estimate, truth, mask, (lo, hi))
}

/// SSIM with an explicit rescaling range; symmetric in its two inputs.
pub fn ssim_with_range(a: &[f64], b: &[f64], mask: &RegionMask, range: (f64, f64)) -> Result<f64> {
    mask.check_len(a.len(), "estimate")?;
    mask.check_len(b.len(), "truth")?;
    let (lo, hi) = range;
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Err(Error::InvalidParameter("SSIM reference has zero range".into()));
    }
    let scale = |v: f64| 2.0 * (v - lo) / (hi - lo) - 1.0;
    let a: Vec<f64> = a.iter().map(|&v| scale(v)).collect();
    let b: Vec<f64> = b.iter().map(|&v| scale(v)).collect();
    let shape = mask.shape();
    let (rows, cols) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let plane = rows * cols;
    let kernel = gaussian_kernel(SSIM_SIGMA, SSIM_TRUNCATE);
    let c1 = (SSIM_K1 * 2.0).powi(2);
    let c2 = (SSIM_K2 * 2.0).powi(2);

    let map: Vec<f64> = a
        .par_chunks(plane)
        .zip(b.par_chunks(plane))
        .flat_map_iter(|(sa, sb)| {
            let blur = |f: &dyn Fn(usize) -> f64| {
                let data: Vec<f64> = (0..plane).map(f).collect();
                gaussian_filter(&data, rows, cols, &kernel)
            };
            let mu_a = blur(&|i| sa[i]);
            let mu_b = blur(&|i| sb[i]);
            let aa = blur(&|i| sa[i] * sa[i]);
            let bb = blur(&|i| sb[i] * sb[i]);
            let ab = blur(&|i| sa[i] * sb[i]);
            (0..plane)
                .map(|i| {
                    let (ma, mb) = (mu_a[i], mu_b[i]);
                    let va = aa[i] - ma * ma;
                    let vb = bb[i] - mb * mb;
                    let cov = ab[i] - ma * mb;
                    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    mask.mean_of(&map)
}

fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f64> {
    let radius = (truncate * sigma + 0.5) as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Half-sample symmetric reflection of an index into `0..n`.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn gaussian_filter(data: &[f64], rows: usize, cols: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; data.len()];
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        for c in 0..cols {
            tmp[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(c as i64 + k as i64 - radius, cols as i64)])
                .sum();
        }
    }
    let mut out = vec![0.0; data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(r as i64 + k as i64 - radius, rows as i64) * cols + c])
                .sum();
        }
    }
    out
}

/// Mean over `material` minus mean over `background`.
pub fn background_subtract(volume: &[f64], material: &RegionMask, background: &RegionMask) -> Result<f64> {
    material.check_len(volume.len(), "volume")?;
    background.check_len(volume.len(), "volume")?;
    if material.overlaps(background) {
        return Err(Error::InvalidParameter(format!(
            "masks {:?} and {:?} overlap",
            material.label, background.label
        )));
    }
    Ok(material.mean_of(volume)? - background.mean_of(volume)?)
}
