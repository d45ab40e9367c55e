use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::constraint::ConstraintParams;
use super::lbfgs::{lbfgs_minimize, SolveTrace, SolverSettings};
use super::objective::{AmplitudeProblem, ConstrainedObjective, UnconstrainedObjective};
use crate::analysis::unwrap_phase;
use crate::error::{Error, Result};
use crate::fresnel::{FresnelModel, PaddingSpec};
use crate::geometry::ScanGeometry;
use crate::image::{ComplexField, RealImage};

/// Bounds applied to the C-NLPR starting point `exp(-phi0 / gamma)`.
pub const Z_INIT_MIN: f64 = 1e-6;
pub const Z_INIT_MAX: f64 = 1.5;

/// Starting point of a U-NLPR solve.
#[derive(Clone, Debug)]
pub enum UnlprInit {
    /// `x0 = 1` everywhere.
    Zero,
    Images { absorption: RealImage, phase: RealImage },
}

/// Starting point of a C-NLPR solve.
#[derive(Clone, Debug)]
pub enum CnlprInit {
    /// `z0 = 1` everywhere.
    Zero,
    Phase(RealImage),
}

#[derive(Clone, Debug)]
pub struct Retrieval {
    pub absorption: RealImage,
    pub phase: RealImage,
    pub trace: SolveTrace,
}

fn check_settings(settings: &SolverSettings) -> Result<()> {
    settings.validate().map_err(Error::InvalidParameter)
}

/// U-NLPR for one view against a prebuilt model.
pub fn unlpr_solve(
    model: &FresnelModel,
    y_list: &[RealImage],
    init: &UnlprInit,
    settings: &SolverSettings,
) -> Result<Retrieval> {
    check_settings(settings)?;
    let problem = AmplitudeProblem::new(model, y_list)?;
    let (rows, cols) = model.dims();
    let (x0, phase0) = match init {
        UnlprInit::Zero => (
            ComplexField::filled(rows, cols, Complex64::new(1.0, 0.0)),
            RealImage::zeros(rows, cols),
        ),
        UnlprInit::Images { absorption, phase } => {
            model.check_dims(absorption.dims(), "initial absorption")?;
            model.check_dims(phase.dims(), "initial phase")?;
            (ComplexField::transmission(absorption, phase)?, phase.clone())
        }
    };
    let v0: Vec<f64> = x0.as_slice().iter().flat_map(|v| [v.re, v.im]).collect();
    let objective = UnconstrainedObjective { problem };
    let (v, trace) = lbfgs_minimize(&objective, v0, settings);
    let x: Vec<Complex64> = v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();

    let mut absorption = Vec::with_capacity(x.len());
    let mut wrapped = Vec::with_capacity(x.len());
    for (index, xv) in x.iter().enumerate() {
        let m = xv.norm();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain {
                what: "zero transmission modulus in the U-NLPR solution",
                index,
            });
        }
        absorption.push(-m.ln());
        wrapped.push(-xv.im.atan2(xv.re));
    }
    let unwrapped = unwrap_phase(&RealImage::new(rows, cols, wrapped)?);
    // Pick the 2 pi offset closest to the starting phase.
    let n = unwrapped.len() as f64;
    let mean_diff: f64 = unwrapped
        .as_slice()
        .iter()
        .zip(phase0.as_slice())
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / n;
    let shift = 2.0 * PI * (mean_diff / (2.0 * PI)).round();
    Ok(Retrieval {
        absorption: RealImage::new(rows, cols, absorption)?,
        phase: unwrapped.map(|v| v - shift),
        trace,
    })
}

pub fn unlpr_retrieve(
    y_list: &[RealImage],
    geometry: &ScanGeometry,
    init: &UnlprInit,
    settings: &SolverSettings,
    padding: PaddingSpec,
) -> Result<Retrieval> {
    let model = FresnelModel::new(geometry, padding)?;
    unlpr_solve(&model, y_list, init, settings)
}

/// `z0 = exp(-phi0 / gamma)` clamped to `[Z_INIT_MIN, Z_INIT_MAX]`.
pub fn z_from_phase(phase: &RealImage, gamma: f64) -> RealImage {
    phase.map(|p| (-p / gamma).exp().clamp(Z_INIT_MIN, Z_INIT_MAX))
}

/// C-NLPR for one view against a prebuilt model. A non-finite objective
/// ends the solve with `Termination::NumericalFailure`; the estimate is then
/// built from the last finite iterate.
pub fn cnlpr_solve(
    model: &FresnelModel,
    y_list: &[RealImage],
    params: &ConstraintParams,
    init: &CnlprInit,
    settings: &SolverSettings,
) -> Result<Retrieval> {
    check_settings(settings)?;
    params.validate()?;
    let problem = AmplitudeProblem::new(model, y_list)?;
    let (rows, cols) = model.dims();
    let z0 = match init {
        CnlprInit::Zero => RealImage::filled(rows, cols, 1.0),
        CnlprInit::Phase(phase) => {
            model.check_dims(phase.dims(), "initial phase")?;
            z_from_phase(phase, params.gamma)
        }
    };
    let objective = ConstrainedObjective {
        problem,
        alpha: params.alpha,
        gamma: params.gamma,
    };
    let (z, trace) = lbfgs_minimize(&objective, z0.into_vec(), settings);
    let log_z: Vec<f64> = z.iter().map(|v| v.ln()).collect();
    Ok(Retrieval {
        absorption: RealImage::from_raw(rows, cols, log_z.iter().map(|l| -params.alpha * l).collect()),
        phase: RealImage::from_raw(rows, cols, log_z.iter().map(|l| -params.gamma * l).collect()),
        trace,
    })
}

pub fn cnlpr_retrieve(
    y_list: &[RealImage],
    geometry: &ScanGeometry,
    params: &ConstraintParams,
    init: &CnlprInit,
    settings: &SolverSettings,
    padding: PaddingSpec,
) -> Result<Retrieval> {
    let model = FresnelModel::new(geometry, padding)?;
    cnlpr_solve(&model, y_list, params, init, settings)
}

/// U-NLPR over every view in parallel; `views[n][l]`.
pub fn unlpr_retrieve_views(
    views: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    inits: &[UnlprInit],
    settings: &SolverSettings,
    padding: PaddingSpec,
) -> Result<Vec<Retrieval>> {
    check_batch(views.len(), inits.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    views
        .par_iter()
        .zip(inits.par_iter())
        .map(|(y, init)| unlpr_solve(&model, y, init, settings))
        .collect()
}

/// C-NLPR over every view in parallel; `views[n][l]`.
pub fn cnlpr_retrieve_views(
    views: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    params: &ConstraintParams,
    inits: &[CnlprInit],
    settings: &SolverSettings,
    padding: PaddingSpec,
) -> Result<Vec<Retrieval>> {
    check_batch(views.len(), inits.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    views
        .par_iter()
        .zip(inits.par_iter())
        .map(|(y, init)| cnlpr_solve(&model, y, params, init, settings))
        .collect()
}

fn check_batch(views: usize, inits: usize) -> Result<()> {
    if views != inits {
        return Err(Error::DimensionMismatch(format!("{views} views but {inits} initializations")));
    }
    Ok(())
}
