use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::phantom::{block_average, Phantom};
use crate::error::{Error, Result};
use crate::fresnel::{FresnelModel, PaddingSpec};
use crate::geometry::ScanGeometry;
use crate::image::{ComplexField, RealImage};

/// Simulated root-intensity data `y[view][distance]`.
///
/// The transmission is built on a `supersample`-times finer grid, propagated
/// at the fine pitch with proportionally scaled edge padding, and the
/// intensity is block-averaged to detector resolution before the square
/// root. Gaussian noise with standard deviation `noise_pct / 100 * y` is then
/// added per pixel. The noise for view `n` and distance `l` comes from a
/// ChaCha8 stream `n * L + l` seeded with `seed`, so results do not depend
/// on the thread count.
pub fn simulate_scan(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    supersample: usize,
    noise_pct: f64,
    seed: u64,
) -> Result<Vec<Vec<RealImage>>> {
    simulate_scan_padded(
        phantom,
        geometry,
        supersample,
        noise_pct,
        seed,
        PaddingSpec::for_geometry(geometry),
    )
}

pub fn simulate_scan_padded(
    phantom: &Phantom,
    geometry: &ScanGeometry,
    supersample: usize,
    noise_pct: f64,
    seed: u64,
    padding: PaddingSpec,
) -> Result<Vec<Vec<RealImage>>> {
    geometry.validate()?;
    if supersample == 0 {
        return Err(Error::InvalidParameter("supersample must be at least 1".into()));
    }
    if !(noise_pct.is_finite() && noise_pct >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise percentage must be non-negative, got {noise_pct}")));
    }
    let fine = geometry.supersampled(supersample);
    let model = FresnelModel::new(&fine, padding.scaled(supersample))?;
    let n_dist = geometry.n_distances() as u64;
    geometry
        .view_angles_rad
        .par_iter()
        .enumerate()
        .map(|(view, &theta)| {
            let (a, phi) = phantom.project_on_grid(&fine, theta);
            let x = ComplexField::transmission(&a, &phi)?;
            let amplitudes = model.forward(&x)?;
            Ok(amplitudes
                .iter()
                .enumerate()
                .map(|(l, amp)| {
                    let y = block_average(&amp.map(|v| v * v), supersample).map(f64::sqrt);
                    if noise_pct == 0.0 {
                        return y;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(view as u64 * n_dist + l as u64);
                    let scale = noise_pct / 100.0;
                    let (rows, cols) = y.dims();
                    let mut samples = y.into_vec();
                    for v in samples.iter_mut() {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        *v += scale * *v * n;
                    }
                    RealImage::from_raw(rows, cols, samples)
                })
                .collect())
        })
        .collect()
}
