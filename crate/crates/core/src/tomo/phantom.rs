//! Sphere phantoms: analytic projections, voxelized ground truth and masks.
//!
//! Object coordinates are `(u, v, w)` in metres about the rotation centre:
//! `v` is the rotation axis (detector rows), `u` and `w` span the axial
//! plane. At view angle `theta` a point projects to the detector coordinate
//! `s = u cos(theta) + w sin(theta)`.

use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use super::Volume;
use crate::analysis::RegionMask;
use crate::error::{Error, Result};
use crate::geometry::{MaterialModel, ScanGeometry};
use crate::image::RealImage;

#[derive(Clone, Debug, PartialEq)]
pub struct Sphere {
    /// `[u, v, w]` in metres.
    pub center_m: [f64; 3],
    pub radius_m: f64,
    pub material: MaterialModel,
}

impl Sphere {
    pub fn new(center_m: [f64; 3], radius_m: f64, material: MaterialModel) -> Result<Self> {
        if !(radius_m.is_finite() && radius_m > 0.0) || center_m.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sphere at {center_m:?} with radius {radius_m} is invalid"
            )));
        }
        material.validate()?;
        Ok(Self {
            center_m,
            radius_m,
            material,
        })
    }

    /// Path length of the ray at detector position `(s, v)` for view angle
    /// `(cos, sin)`.
    pub fn chord(&self, s: f64, v: f64, cos: f64, sin: f64) -> f64 {
        let [cu, cv, cw] = self.center_m;
        let sc = cu * cos + cw * sin;
        let rho2 = (s - sc).powi(2) + (v - cv).powi(2);
        let r2 = self.radius_m * self.radius_m;
        if rho2 < r2 {
            2.0 * (r2 - rho2).sqrt()
        } else {
            0.0
        }
    }

    fn distance(&self, p: [f64; 3]) -> f64 {
        let [cu, cv, cw] = self.center_m;
        ((p[0] - cu).powi(2) + (p[1] - cv).powi(2) + (p[2] - cw).powi(2)).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Phantom {
    pub spheres: Vec<Sphere>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomFile {
    #[serde(default)]
    sphere: Vec<SphereEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereEntry {
    #[serde(default)]
    name: Option<String>,
    center_um: [f64; 3],
    radius_um: f64,
    delta: f64,
    beta: f64,
}

impl Phantom {
    pub fn new(spheres: Vec<Sphere>) -> Self {
        Self { spheres }
    }

    /// Parses `[[sphere]]` tables with `center_um`, `radius_um`, `delta`,
    /// `beta` and an optional `name`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PhantomFile =
            toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("phantom description: {e}")))?;
        let spheres = file
            .sphere
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let name = e.name.unwrap_or_else(|| format!("sphere-{i}"));
                Sphere::new(
                    e.center_um.map(|c| c * 1e-6),
                    e.radius_um * 1e-6,
                    MaterialModel::new(name, e.delta, e.beta)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spheres })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for s in &self.spheres {
            let c = s.center_m.map(|v| v * 1e6);
            out.push_str(&format!(
                "[[sphere]]\nname = {:?}\ncenter_um = [{}, {}, {}]\nradius_um = {}\ndelta = {:e}\nbeta = {:e}\n\n",
                s.material.name,
                c[0],
                c[1],
                c[2],
                s.radius_m * 1e6,
                s.material.delta,
                s.material.beta
            ));
        }
        out
    }

    /// `(A, phi)` sampled at pixel centres of `grid` for view angle `theta`.
    /// Chords are summed over spheres, so overlapping spheres double count.
    pub fn project_on_grid(&self, grid: &ScanGeometry, theta: f64) -> (RealImage, RealImage) {
        let k = grid.wavenumber();
        let (cos, sin) = (theta.cos(), theta.sin());
        let (rows, cols) = (grid.n_rows, grid.n_cols);
        let dx = grid.pixel_width_m;
        let mut a = vec![0.0; rows * cols];
        let mut phi = vec![0.0; rows * cols];
        for sphere in &self.spheres {
            let (kb, kd) = (k * sphere.material.beta, k * sphere.material.delta);
            for r in 0..rows {
                let v = (r as f64 - (rows as f64 - 1.0) / 2.0) * dx;
                if (v - sphere.center_m[1]).abs() >= sphere.radius_m {
                    continue;
                }
                for c in 0..cols {
                    let s = (c as f64 - (cols as f64 - 1.0) / 2.0) * dx;
                    let chord = sphere.chord(s, v, cos, sin);
                    if chord > 0.0 {
                        a[r * cols + c] += kb * chord;
                        phi[r * cols + c] += kd * chord;
                    }
                }
            }
        }
        (
            RealImage::from_raw(rows, cols, a),
            RealImage::from_raw(rows, cols, phi),
        )
    }

    /// Voxel-centre sampled `delta`; later spheres overwrite earlier ones.
    /// The volume has `n_rows` slices of `n_cols x n_cols` voxels.
    pub fn truth_volume(&self, geometry: &ScanGeometry) -> Volume {
        let mut vol = Volume::zeros(geometry.n_rows, geometry.n_cols, geometry.pixel_width_m);
        let n = vol.n_cols();
        let plane = n * n;
        vol.as_mut_slice()
            .par_chunks_mut(plane)
            .enumerate()
            .for_each(|(slice, out)| {
                for (i, o) in out.iter_mut().enumerate() {
                    let p = voxel_position(geometry, slice, i / n, i % n);
                    for sphere in &self.spheres {
                        if sphere.distance(p) <= sphere.radius_m {
                            *o = sphere.material.delta;
                        }
                    }
                }
            });
        vol
    }

    /// Voxels whose centre lies at least `margin_m` inside sphere `index`.
    pub fn interior_mask(&self, geometry: &ScanGeometry, index: usize, margin_m: f64) -> Result<RegionMask> {
        let sphere = self
            .spheres
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("no sphere {index}")))?;
        let label = format!("{}-interior", sphere.material.name);
        volume_mask(geometry, label, |p| sphere.distance(p) <= sphere.radius_m - margin_m)
    }

    /// Voxels inside any sphere.
    pub fn foreground_mask(&self, geometry: &ScanGeometry) -> Result<RegionMask> {
        volume_mask(geometry, "foreground".into(), |p| {
            self.spheres.iter().any(|s| s.distance(p) <= s.radius_m)
        })
    }

    /// Voxels at least `margin_m` outside every sphere and within
    /// `fov_fraction` of the reconstruction circle's radius.
    pub fn background_mask(&self, geometry: &ScanGeometry, margin_m: f64, fov_fraction: f64) -> Result<RegionMask> {
        let fov = fov_fraction * 0.5 * geometry.n_cols as f64 * geometry.pixel_width_m;
        volume_mask(geometry, "background-air".into(), |p| {
            p[0].hypot(p[2]) <= fov && self.spheres.iter().all(|s| s.distance(p) >= s.radius_m + margin_m)
        })
    }
}

/// Centre of voxel `(slice, w_index, u_index)` as `[u, v, w]`.
pub fn voxel_position(geometry: &ScanGeometry, slice: usize, w_index: usize, u_index: usize) -> [f64; 3] {
    let dx = geometry.pixel_width_m;
    let n = geometry.n_cols as f64;
    let nv = geometry.n_rows as f64;
    [
        (u_index as f64 - (n - 1.0) / 2.0) * dx,
        (slice as f64 - (nv - 1.0) / 2.0) * dx,
        (w_index as f64 - (n - 1.0) / 2.0) * dx,
    ]
}

fn volume_mask(geometry: &ScanGeometry, label: String, inside: impl Fn([f64; 3]) -> bool) -> Result<RegionMask> {
    let n = geometry.n_cols;
    let mut flags = Vec::with_capacity(geometry.n_rows * n * n);
    for slice in 0..geometry.n_rows {
        for w in 0..n {
            for u in 0..n {
                flags.push(inside(voxel_position(geometry, slice, w, u)));
            }
        }
    }
    RegionMask::new(vec![geometry.n_rows, n, n], flags, label)
}

/// Block average of a `factor`-times supersampled image.
pub fn block_average(fine: &RealImage, factor: usize) -> RealImage {
    let (rows, cols) = (fine.rows() / factor, fine.cols() / factor);
    let scale = 1.0 / (factor * factor) as f64;
    RealImage::from_fn(rows, cols, |r, c| {
        let mut acc = 0.0;
        for i in 0..factor {
            for j in 0..factor {
                acc += fine.get(r * factor + i, c * factor + j);
            }
        }
        acc * scale
    })
}

/// Detector-resolution `(A, phi)` for one view, integrated over a
/// `supersample x supersample` grid of rays per pixel.
pub fn project_phantom(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    view_index: usize,
    supersample: usize,
) -> Result<(RealImage, RealImage)> {
    if supersample == 0 {
        return Err(Error::InvalidParameter("supersample must be at least 1".into()));
    }
    let theta = *geometry
        .view_angles_rad
        .get(view_index)
        .ok_or_else(|| Error::InvalidParameter(format!("view index {view_index} out of range")))?;
    let (a, phi) = phantom.project_on_grid(&geometry.supersampled(supersample), theta);
    Ok((block_average(&a, supersample), block_average(&phi, supersample)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{materials, wavelength_from_energy_ev};
    use proptest::prelude::*;

    fn geometry(n: usize, views: usize) -> ScanGeometry {
        ScanGeometry::new(
            wavelength_from_energy_ev(20_000.0),
            1.29e-6,
            vec![0.2],
            n,
            n,
            crate::geometry::equally_spaced_angles(views, std::f64::consts::PI),
        )
        .unwrap()
    }

    #[test]
    fn analytic_chords() {
        // Odd grid: the central pixel sits on the rotation axis.
        let g = geometry(33, 1);
        let r = 10.0 * g.pixel_width_m;
        let sic = materials::silicon_carbide();
        let p = Phantom::new(vec![Sphere::new([0.0; 3], r, sic.clone()).unwrap()]);
        let (a, phi) = project_phantom(&p, &g, 0, 1).unwrap();
        let k = g.wavenumber();
        assert!((phi.get(16, 16) - k * sic.delta * 2.0 * r).abs() < 1e-12);
        assert!((a.get(16, 16) - k * sic.beta * 2.0 * r).abs() < 1e-15);
        // Impact parameter r/2 gives a chord of r sqrt(3).
        assert!((phi.get(16, 21) - k * sic.delta * r * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(phi.get(0, 0), 0.0);
        assert_eq!(a.get(16, 30), 0.0);
    }

    #[test]
    fn centred_sphere_is_rotation_invariant() {
        let g = geometry(32, 12);
        let p = Phantom::new(vec![Sphere::new([0.0; 3], 9e-6, materials::alumina()).unwrap()]);
        let (_, first) = project_phantom(&p, &g, 0, 2).unwrap();
        for view in 1..12 {
            let (_, phi) = project_phantom(&p, &g, view, 2).unwrap();
            assert!(phi.max_abs_diff(&first) < 1e-12);
        }
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
[[sphere]]
name = "SiC"
center_um = [1.0, -2.0, 3.5]
radius_um = 12.0
delta = 1.67e-6
beta = 4.77e-9

[[sphere]]
center_um = [0.0, 0.0, 0.0]
radius_um = 2.0
delta = 1e-6
beta = 0.0
"#;
        let p = Phantom::from_toml_str(text).unwrap();
        assert_eq!(p.spheres.len(), 2);
        assert_eq!(p.spheres[0].material.name, "SiC");
        assert!((p.spheres[0].center_m[2] - 3.5e-6).abs() < 1e-18);
        let again = Phantom::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(again.spheres.len(), 2);
        assert!((again.spheres[0].radius_m - 12e-6).abs() < 1e-18);
        assert!(Phantom::from_toml_str("[[sphere]]\ncenter_um=[0,0,0]\nradius_um=-1\ndelta=1\nbeta=0").is_err());
        assert!(Phantom::from_toml_str("[[sphere]]\ncolour='red'").is_err());
        assert!(Phantom::from_toml_str("").unwrap().spheres.is_empty());
    }

    #[test]
    fn truth_volume_and_masks() {
        let g = geometry(16, 1);
        let s = Sphere::new([0.0, 0.0, 0.0], 4.0 * g.pixel_width_m, materials::teflon()).unwrap();
        let p = Phantom::new(vec![s]);
        let vol = p.truth_volume(&g);
        let fg = p.foreground_mask(&g).unwrap();
        let bg = p.background_mask(&g, g.pixel_width_m, 0.9).unwrap();
        assert!(!fg.overlaps(&bg));
        let dif = crate::analysis::background_subtract(vol.as_slice(), &fg, &bg).unwrap();
        assert!((dif - materials::teflon().delta).abs() < 1e-12 * dif);
        let interior = p.interior_mask(&g, 0, 2.0 * g.pixel_width_m).unwrap();
        assert!(interior.count() < fg.count());
    }

    proptest! {
        #[test]
        fn projection_is_additive(theta in 0.0f64..3.2, cu in -8e-6f64..-4e-6, cw in -3e-6f64..3e-6) {
            let g = geometry(24, 1);
            let a = Sphere::new([cu, 0.0, cw], 3e-6, materials::silicon_carbide()).unwrap();
            let b = Sphere::new([6e-6, 2e-6, 0.0], 3.5e-6, materials::polyimide()).unwrap();
            let (aa, pa) = Phantom::new(vec![a.clone()]).project_on_grid(&g, theta);
            let (ab, pb) = Phantom::new(vec![b.clone()]).project_on_grid(&g, theta);
            let (aab, pab) = Phantom::new(vec![a, b]).project_on_grid(&g, theta);
            for i in 0..pab.len() {
                prop_assert_eq!(pab.as_slice()[i], pa.as_slice()[i] + pb.as_slice()[i]);
                prop_assert_eq!(aab.as_slice()[i], aa.as_slice()[i] + ab.as_slice()[i]);
            }
        }
    }
}
