//! Parallel-beam filtered back projection of `phi / k` sinograms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::image::RealImage;

/// `delta` on `n_slices` axial slices of `n_cols x n_cols` voxels, indexed
/// `(slice, w, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    n_slices: usize,
    n_cols: usize,
    pub voxel_width_m: f64,
    samples: Vec<f64>,
}

impl Volume {
    pub fn zeros(n_slices: usize, n_cols: usize, voxel_width_m: f64) -> Self {
        Self {
            n_slices,
            n_cols,
            voxel_width_m,
            samples: vec![0.0; n_slices * n_cols * n_cols],
        }
    }

    pub fn from_slices(slices: &[RealImage], voxel_width_m: f64) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidParameter("volume needs at least one slice".into()))?;
        let n = first.cols();
        if slices.iter().any(|s| s.dims() != (n, n)) {
            return Err(Error::DimensionMismatch("volume slices must be square and equal-sized".into()));
        }
        Ok(Self {
            n_slices: slices.len(),
            n_cols: n,
            voxel_width_m,
            samples: slices.iter().flat_map(|s| s.as_slice().iter().copied()).collect(),
        })
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n_slices, self.n_cols, self.n_cols]
    }

    pub fn get(&self, slice: usize, w: usize, u: usize) -> f64 {
        self.samples[(slice * self.n_cols + w) * self.n_cols + u]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn slice(&self, index: usize) -> RealImage {
        let plane = self.n_cols * self.n_cols;
        RealImage::from_raw(
            self.n_cols,
            self.n_cols,
            self.samples[index * plane..(index + 1) * plane].to_vec(),
        )
    }

    pub fn slices(&self) -> Vec<RealImage> {
        (0..self.n_slices).map(|i| self.slice(i)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// Per-view phase (and optionally absorption) images of one scan.
#[derive(Clone, Debug)]
pub struct ProjectionSet {
    pub geometry: ScanGeometry,
    pub phase: Vec<RealImage>,
    pub absorption: Option<Vec<RealImage>>,
}

impl ProjectionSet {
    pub fn new(geometry: ScanGeometry, phase: Vec<RealImage>, absorption: Option<Vec<RealImage>>) -> Result<Self> {
        geometry.validate()?;
        let check = |images: &[RealImage], what: &str| -> Result<()> {
            if images.len() != geometry.n_views() {
                return Err(Error::DimensionMismatch(format!(
                    "{} {what} images for {} view angles",
                    images.len(),
                    geometry.n_views()
                )));
            }
            if let Some(img) = images.iter().find(|i| i.dims() != (geometry.n_rows, geometry.n_cols)) {
                return Err(Error::DimensionMismatch(format!(
                    "{what} image is {:?}, geometry expects {:?}",
                    img.dims(),
                    (geometry.n_rows, geometry.n_cols)
                )));
            }
            Ok(())
        };
        check(&phase, "phase")?;
        if let Some(a) = &absorption {
            check(a, "absorption")?;
        }
        Ok(Self {
            geometry,
            phase,
            absorption,
        })
    }
}

/// Ram-Lak response on a `2^k >= 2n` grid, from the band-limited spatial
/// kernel `h[0] = 1/4`, `h[odd] = -1/(pi n)^2`.
fn ramp_filter(n: usize) -> Vec<f64> {
    let len = (2 * n).next_power_of_two().max(64);
    let mut kernel: Vec<Complex64> = (0..len)
        .map(|i| {
            let m = if i <= len / 2 { i as i64 } else { i as i64 - len as i64 };
            let v = if m == 0 {
                0.25
            } else if m % 2 != 0 {
                -1.0 / (PI * m as f64).powi(2)
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut kernel);
    kernel.iter().map(|v| v.re).collect()
}

/// Ramp-filters every row of every view; `1 / pixel_width` is folded in.
fn filter_rows(views: &[RealImage], scale: f64) -> Vec<Vec<f64>> {
    let cols = views[0].cols();
    let response = ramp_filter(cols);
    let len = response.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    views
        .par_iter()
        .map(|img| {
            let mut out = Vec::with_capacity(img.len());
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for r in 0..img.rows() {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (b, &v) in buf.iter_mut().zip(&img.as_slice()[r * cols..(r + 1) * cols]) {
                    *b = Complex64::new(v, 0.0);
                }
                fwd.process(&mut buf);
                for (b, h) in buf.iter_mut().zip(&response) {
                    *b *= *h;
                }
                inv.process(&mut buf);
                out.extend(buf[..cols].iter().map(|v| v.re * scale / len as f64));
            }
            out
        })
        .collect()
}

/// Reconstructs `delta` from `phi / k`: Ram-Lak filtering along detector
/// rows, then linear-interpolated back projection weighted by `pi / n_views`.
pub fn fbp_reconstruct(projections: &ProjectionSet) -> Result<Volume> {
    let g = &projections.geometry;
    if projections.phase.is_empty() {
        return Err(Error::InvalidParameter("empty projection set".into()));
    }
    let k = g.wavenumber();
    let scaled: Vec<RealImage> = projections.phase.iter().map(|p| p.map(|v| v / k)).collect();
    Ok(backproject_filtered(g, &scaled))
}

/// FBP of arbitrary line-integral images (units of delta times metres).
pub fn fbp_line_integrals(geometry: &ScanGeometry, line_integrals: &[RealImage]) -> Result<Volume> {
    if line_integrals.is_empty() || line_integrals.len() != geometry.n_views() {
        return Err(Error::DimensionMismatch(format!(
            "{} projections for {} view angles",
            line_integrals.len(),
            geometry.n_views()
        )));
    }
    Ok(backproject_filtered(geometry, line_integrals))
}

fn backproject_filtered(g: &ScanGeometry, views: &[RealImage]) -> Volume {
    let n = g.n_cols;
    let rows = g.n_rows;
    let filtered = filter_rows(views, 1.0 / g.pixel_width_m);
    let trig: Vec<(f64, f64)> = g.view_angles_rad.iter().map(|t| (t.cos(), t.sin())).collect();
    let weight = PI / g.n_views() as f64;
    let centre = (n as f64 - 1.0) / 2.0;
    let mut vol = Volume::zeros(rows, n, g.pixel_width_m);
    vol.as_mut_slice()
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(slice, out)| {
            for (view, &(cos, sin)) in trig.iter().enumerate() {
                let row = &filtered[view][slice * n..(slice + 1) * n];
                for w in 0..n {
                    let wc = w as f64 - centre;
                    for u in 0..n {
                        // Detector coordinate in pixels from the first column.
                        let t = (u as f64 - centre) * cos + wc * sin + centre;
                        let i = t.floor();
                        if i < 0.0 || i >= (n - 1) as f64 {
                            if t == (n - 1) as f64 {
                                out[w * n + u] += weight * row[n - 1];
                            }
                            continue;
                        }
                        let f = t - i;
                        let i = i as usize;
                        out[w * n + u] += weight * (row[i] * (1.0 - f) + row[i + 1] * f);
                    }
                }
            }
        });
    vol
}

/// Line integrals of `volume` at the geometry's view angles (bilinear
/// sampling along each ray at half-voxel steps); units of delta times metres.
pub fn reproject(volume: &Volume, geometry: &ScanGeometry) -> Result<Vec<RealImage>> {
    if volume.n_slices() != geometry.n_rows || volume.n_cols() != geometry.n_cols {
        return Err(Error::DimensionMismatch(format!(
            "volume {:?} does not match a {}x{} detector",
            volume.shape(),
            geometry.n_rows,
            geometry.n_cols
        )));
    }
    let n = volume.n_cols();
    let centre = (n as f64 - 1.0) / 2.0;
    let step = 0.5;
    let n_steps = (2.0 * n as f64 / step) as usize;
    let sample = |slice: usize, w: f64, u: f64| -> f64 {
        if w < 0.0 || u < 0.0 || w > (n - 1) as f64 || u > (n - 1) as f64 {
            return 0.0;
        }
        let (w0, u0) = (w.floor() as usize, u.floor() as usize);
        let (w1, u1) = ((w0 + 1).min(n - 1), (u0 + 1).min(n - 1));
        let (fw, fu) = (w - w0 as f64, u - u0 as f64);
        let v = |a, b| volume.get(slice, a, b);
        (1.0 - fw) * ((1.0 - fu) * v(w0, u0) + fu * v(w0, u1)) + fw * ((1.0 - fu) * v(w1, u0) + fu * v(w1, u1))
    };
    Ok(geometry
        .view_angles_rad
        .par_iter()
        .map(|&theta| {
            let (cos, sin) = (theta.cos(), theta.sin());
            RealImage::from_fn(geometry.n_rows, n, |slice, col| {
                let s = col as f64 - centre;
                let mut acc = 0.0;
                for k in 0..n_steps {
                    let tau = (k as f64 - (n_steps as f64 - 1.0) / 2.0) * step;
                    let u = s * cos - tau * sin + centre;
                    let w = s * sin + tau * cos + centre;
                    acc += sample(slice, w, u);
                }
                acc * step * volume.voxel_width_m
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{equally_spaced_angles, materials, wavelength_from_energy_ev};
    use crate::tomo::phantom::{project_phantom, Phantom, Sphere};

    fn geometry(n: usize, views: usize) -> ScanGeometry {
        ScanGeometry::new(
            wavelength_from_energy_ev(20_000.0),
            1.29e-6,
            vec![0.2],
            n,
            n,
            equally_spaced_angles(views, PI),
        )
        .unwrap()
    }

    #[test]
    fn zero_projections_give_zero_volume() {
        let g = geometry(16, 8);
        let set = ProjectionSet::new(g.clone(), vec![RealImage::zeros(16, 16); 8], None).unwrap();
        let vol = fbp_reconstruct(&set).unwrap();
        assert!(vol.as_slice().iter().all(|&v| v == 0.0));
        assert!(ProjectionSet::new(g, vec![RealImage::zeros(16, 16); 7], None).is_err());
    }

    #[test]
    fn ramp_response_shape() {
        // Truncating the spatial kernel leaves a small positive DC term.
        let r = ramp_filter(64);
        assert!(r[0] > 0.0 && r[0] < 5e-3);
        assert!(r.iter().all(|&v| v > -1e-12));
        // |f| at Nyquist, in cycles per sample.
        assert!((r[r.len() / 2] - 0.5).abs() < 5e-3, "{}", r[r.len() / 2]);
    }

    #[test]
    fn sphere_centre_value() {
        let g = geometry(48, 128);
        let sic = materials::silicon_carbide();
        let p = Phantom::new(vec![Sphere::new([2e-6, 0.0, -3e-6], 14e-6, sic.clone()).unwrap()]);
        let phase: Vec<RealImage> = (0..128).map(|v| project_phantom(&p, &g, v, 4).unwrap().1).collect();
        let vol = fbp_reconstruct(&ProjectionSet::new(g.clone(), phase, None).unwrap()).unwrap();
        let fg = p.interior_mask(&g, 0, 3.0 * g.pixel_width_m).unwrap();
        let bg = p.background_mask(&g, 3.0 * g.pixel_width_m, 0.85).unwrap();
        let d = crate::analysis::background_subtract(vol.as_slice(), &fg, &bg).unwrap();
        assert!((d - sic.delta).abs() < 0.05 * sic.delta, "{d} vs {}", sic.delta);
    }

    #[test]
    fn reprojection_is_consistent() {
        let g = geometry(48, 96);
        let p = Phantom::new(vec![
            Sphere::new([-6e-6, 2e-6, 5e-6], 10e-6, materials::alumina()).unwrap(),
            Sphere::new([12e-6, -8e-6, -4e-6], 6e-6, materials::teflon()).unwrap(),
        ]);
        let k = g.wavenumber();
        let lines: Vec<RealImage> = (0..96)
            .map(|v| project_phantom(&p, &g, v, 4).unwrap().1.map(|x| x / k))
            .collect();
        let vol = fbp_line_integrals(&g, &lines).unwrap();
        let again = reproject(&vol, &g).unwrap();
        // Interior: detector pixels where the true projection is non-zero.
        let (mut err, mut norm) = (0.0, 0.0);
        for (a, b) in again.iter().zip(&lines) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                if *y > 0.0 {
                    err += (x - y).powi(2);
                    norm += y * y;
                }
            }
        }
        let rel = (err / norm).sqrt();
        assert!(rel < 0.03, "relative RMS {rel}");
    }

    #[test]
    fn fbp_is_linear() {
        let g = geometry(20, 16);
        let make = |seed: f64| -> Vec<RealImage> {
            (0..16)
                .map(|v| RealImage::from_fn(20, 20, |r, c| ((r * 7 + c * 3 + v) as f64 * seed).sin() * 1e-10))
                .collect()
        };
        let (p, q) = (make(0.37), make(1.13));
        let (a, b) = (2.5, -0.75);
        let combo: Vec<RealImage> = p
            .iter()
            .zip(&q)
            .map(|(x, y)| RealImage::from_fn(20, 20, |r, c| a * x.get(r, c) + b * y.get(r, c)))
            .collect();
        let rp = fbp_line_integrals(&g, &p).unwrap();
        let rq = fbp_line_integrals(&g, &q).unwrap();
        let rc = fbp_line_integrals(&g, &combo).unwrap();
        let scale = rc.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..rc.as_slice().len() {
            let expected = a * rp.as_slice()[i] + b * rq.as_slice()[i];
            assert!((rc.as_slice()[i] - expected).abs() <= 1e-10 * scale);
        }
    }
}
