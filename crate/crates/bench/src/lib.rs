//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use xpct_core::geometry::{equally_spaced_angles, materials, wavelength_from_energy_ev};
use xpct_core::tomo::{simulate_scan, Phantom, Sphere};
use xpct_core::{RealImage, ScanGeometry};

/// Square detector at 20 keV and 1.29 um pixels.
pub fn geometry(size: usize, distances_m: Vec<f64>, views: usize) -> ScanGeometry {
    ScanGeometry::new(
        wavelength_from_energy_ev(20_000.0),
        1.29e-6,
        distances_m,
        size,
        size,
        equally_spaced_angles(views, PI),
    )
    .expect("benchmark geometry is valid")
}

/// One SiC sphere filling about a third of the field of view.
pub fn sphere_phantom(size: usize) -> Phantom {
    let radius = size as f64 * 1.29e-6 / 6.0;
    Phantom::new(vec![
        Sphere::new([0.1 * radius, -0.2 * radius, 0.0], radius, materials::silicon_carbide()).expect("valid sphere"),
    ])
}

/// Noisy measurements `views[n][l]`.
pub fn measurements(geometry: &ScanGeometry) -> Vec<Vec<RealImage>> {
    simulate_scan(&sphere_phantom(geometry.n_cols), geometry, 2, 0.1, 0).expect("simulation succeeds")
}
