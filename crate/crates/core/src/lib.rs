//! Propagation-based X-ray phase-contrast tomography: Fresnel forward
//! models, linear and non-linear phase retrieval, sphere-phantom simulation,
//! filtered back projection and image-quality metrics.

pub mod analysis;
pub mod error;
pub mod fft;
pub mod fresnel;
pub mod geometry;
pub mod image;
pub mod linpr;
pub mod nlpr;
pub mod pipeline;
pub mod stack;
pub mod tomo;

pub use analysis::{MtfCurve, RegionMask};
pub use error::{Error, Result};
pub use fresnel::{FresnelModel, PaddingSpec, TransferFunction};
pub use geometry::{MaterialModel, ScanGeometry};
pub use image::{ComplexField, RealImage};
pub use nlpr::{ConstraintMode, ConstraintParams, SolveTrace, SolverSettings, Termination};
pub use stack::{ContentKind, StackHeader};
pub use tomo::{Phantom, ProjectionSet, Sphere, Volume};
