//! Per-view retrieval driver shared by the command-line tool, the
//! acceptance harness and the benchmarks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::{FresnelModel, PaddingSpec};
use crate::geometry::{MaterialModel, ScanGeometry};
use crate::image::RealImage;
use crate::linpr::{Ctf, CtfRegularization, Paganin};
use crate::nlpr::{cnlpr_solve, unlpr_solve, CnlprInit, ConstraintParams, SolveTrace, SolverSettings, UnlprInit};
use crate::tomo::{fbp_reconstruct, ProjectionSet, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Paganin,
    Ctf,
    Unlpr,
    Cnlpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Zero,
    Paganin,
    Ctf,
}

macro_rules! kebab_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidParameter(format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

kebab_enum!(Method, Method::Paganin => "paganin", Method::Ctf => "ctf", Method::Unlpr => "unlpr", Method::Cnlpr => "cnlpr");
kebab_enum!(InitKind, InitKind::Zero => "zero", InitKind::Paganin => "paganin", InitKind::Ctf => "ctf");

#[derive(Clone, Debug)]
pub struct RetrievalConfig {
    pub method: Method,
    /// Starting point of the iterative methods.
    pub init: InitKind,
    /// Needed by Paganin retrieval or initialization.
    pub material: Option<MaterialModel>,
    /// Needed by C-NLPR.
    pub constraint: Option<ConstraintParams>,
    pub ctf: CtfRegularization,
    /// Distance whose image Paganin retrieval uses.
    pub paganin_distance_index: usize,
    /// Distance assumed by the Paganin filter, if different from the
    /// acquisition distance.
    pub paganin_assumed_distance_m: Option<f64>,
    pub settings: SolverSettings,
    pub padding: PaddingSpec,
}

impl RetrievalConfig {
    pub fn new(method: Method, geometry: &ScanGeometry) -> Self {
        Self {
            method,
            init: InitKind::Zero,
            material: None,
            constraint: None,
            ctf: CtfRegularization::default(),
            paganin_distance_index: 0,
            paganin_assumed_distance_m: None,
            settings: SolverSettings::default(),
            padding: PaddingSpec::for_geometry(geometry),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ViewRetrieval {
    pub absorption: RealImage,
    pub phase: RealImage,
    /// Present for the iterative methods.
    pub trace: Option<SolveTrace>,
}

enum Linear {
    Paganin(Paganin),
    Ctf(Ctf),
}

impl Linear {
    fn build(kind: InitKind, config: &RetrievalConfig, geometry: &ScanGeometry) -> Result<Option<Self>> {
        Ok(match kind {
            InitKind::Zero => None,
            InitKind::Paganin => {
                let material = config
                    .material
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("Paganin retrieval needs a material".into()))?;
                let distance = match config.paganin_assumed_distance_m {
                    Some(r) => r,
                    None => *geometry.distances_m.get(config.paganin_distance_index).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "Paganin distance index {} out of range",
                            config.paganin_distance_index
                        ))
                    })?,
                };
                Some(Linear::Paganin(Paganin::at_distance(geometry, distance, material, config.padding)?))
            }
            InitKind::Ctf => Some(Linear::Ctf(Ctf::new(geometry, config.ctf, config.padding)?)),
        })
    }

    fn apply(&self, y: &[RealImage], paganin_index: usize) -> Result<(RealImage, RealImage)> {
        match self {
            Linear::Paganin(p) => p.retrieve(&y[paganin_index]),
            Linear::Ctf(c) => c.retrieve(y),
        }
    }
}

/// Runs the configured retrieval on every view (`views[n][l]`) in parallel.
pub fn retrieve_views(
    config: &RetrievalConfig,
    views: &[Vec<RealImage>],
    geometry: &ScanGeometry,
) -> Result<Vec<ViewRetrieval>> {
    geometry.validate()?;
    if views.len() != geometry.n_views() {
        return Err(Error::DimensionMismatch(format!(
            "{} measured views for {} view angles",
            views.len(),
            geometry.n_views()
        )));
    }
    if let Some(v) = views.iter().find(|v| v.len() != geometry.n_distances()) {
        return Err(Error::DimensionMismatch(format!(
            "{} images in a view for {} distances",
            v.len(),
            geometry.n_distances()
        )));
    }
    let pidx = config.paganin_distance_index;
    let linear = match config.method {
        Method::Paganin => Linear::build(InitKind::Paganin, config, geometry)?,
        Method::Ctf => Linear::build(InitKind::Ctf, config, geometry)?,
        Method::Unlpr | Method::Cnlpr => Linear::build(config.init, config, geometry)?,
    };
    let model = match config.method {
        Method::Unlpr | Method::Cnlpr => {
            config.settings.validate().map_err(Error::InvalidParameter)?;
            Some(FresnelModel::new(geometry, config.padding)?)
        }
        _ => None,
    };
    let constraint = match config.method {
        Method::Cnlpr => Some(
            config
                .constraint
                .ok_or_else(|| Error::InvalidParameter("C-NLPR needs constraint parameters".into()))?,
        ),
        _ => None,
    };

    views
        .par_iter()
        .map(|y| {
            let start = linear.as_ref().map(|l| l.apply(y, pidx)).transpose()?;
            match config.method {
                Method::Paganin | Method::Ctf => {
                    let (absorption, phase) = start.expect("linear method always has an estimate");
                    Ok(ViewRetrieval {
                        absorption,
                        phase,
                        trace: None,
                    })
                }
                Method::Unlpr => {
                    let init = match start {
                        None => UnlprInit::Zero,
                        Some((absorption, phase)) => UnlprInit::Images { absorption, phase },
                    };
                    let r = unlpr_solve(model.as_ref().unwrap(), y, &init, &config.settings)?;
                    Ok(ViewRetrieval {
                        absorption: r.absorption,
                        phase: r.phase,
                        trace: Some(r.trace),
                    })
                }
                Method::Cnlpr => {
                    let init = match start {
                        None => CnlprInit::Zero,
                        Some((_, phase)) => CnlprInit::Phase(phase),
                    };
                    let params = constraint.as_ref().unwrap();
                    let r = cnlpr_solve(model.as_ref().unwrap(), y, params, &init, &config.settings)?;
                    Ok(ViewRetrieval {
                        absorption: r.absorption,
                        phase: r.phase,
                        trace: Some(r.trace),
                    })
                }
            }
        })
        .collect()
}

/// FBP of the retrieved phase images.
pub fn reconstruct(results: &[ViewRetrieval], geometry: &ScanGeometry) -> Result<Volume> {
    let set = ProjectionSet::new(
        geometry.clone(),
        results.iter().map(|r| r.phase.clone()).collect(),
        Some(results.iter().map(|r| r.absorption.clone()).collect()),
    )?;
    fbp_reconstruct(&set)
}
