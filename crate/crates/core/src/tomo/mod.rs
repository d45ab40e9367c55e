//! Sphere phantoms, measurement simulation and filtered back projection.

mod fbp;
mod phantom;
mod simulate;

pub use fbp::{fbp_line_integrals, fbp_reconstruct, reproject, ProjectionSet, Volume};
pub use phantom::{block_average, project_phantom, voxel_position, Phantom, Sphere};
pub use simulate::{simulate_scan, simulate_scan_padded};
