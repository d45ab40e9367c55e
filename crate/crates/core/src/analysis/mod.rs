//! Phase unwrapping and image-quality metrics.

mod metrics;
mod mtf;
mod unwrap;

pub use metrics::{background_subtract, nrmse, ssim, ssim_with_range, RegionMask, SSIM_SIGMA};
pub use mtf::{mtf_from_disc, MtfCurve, ESF_BIN_PX};
pub use unwrap::unwrap_phase;
