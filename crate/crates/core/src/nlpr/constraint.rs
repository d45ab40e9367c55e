use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MaterialModel, ScanGeometry};

/// Default lower bound on the dynamic range of `z` for [`ConstraintMode::TrOpt`].
pub const DEFAULT_T_LOW: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    OneAlpha,
    OneGamma,
    #[serde(rename = "tropt")]
    TrOpt,
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintMode::OneAlpha => "one-alpha",
            ConstraintMode::OneGamma => "one-gamma",
            ConstraintMode::TrOpt => "tropt",
        })
    }
}

impl FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-alpha" => Ok(ConstraintMode::OneAlpha),
            "one-gamma" => Ok(ConstraintMode::OneGamma),
            "tropt" => Ok(ConstraintMode::TrOpt),
            other => Err(Error::InvalidParameter(format!("unknown constraint mode {other:?}"))),
        }
    }
}

/// Exponent of the single-material parameterization `x = z^(alpha + i gamma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub alpha: f64,
    pub gamma: f64,
    pub mode: ConstraintMode,
    pub t_low: f64,
}

impl ConstraintParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constraint exponent ({}, {}) must be finite with alpha >= 0",
                self.alpha, self.gamma
            )));
        }
        if self.alpha == 0.0 && self.gamma == 0.0 {
            return Err(Error::InvalidParameter("constraint exponent is zero".into()));
        }
        Ok(())
    }
}

pub fn choose_constraint(
    mode: ConstraintMode,
    material: &MaterialModel,
    geometry: &ScanGeometry,
    t_low: f64,
) -> Result<ConstraintParams> {
    material.validate()?;
    let (delta, beta) = (material.delta, material.beta);
    let (alpha, gamma) = match mode {
        ConstraintMode::OneAlpha => {
            if beta <= 0.0 {
                return Err(Error::InvalidParameter(
                    "one-alpha needs beta > 0 (gamma = delta/beta)".into(),
                ));
            }
            (1.0, delta / beta)
        }
        ConstraintMode::OneGamma => {
            if delta <= 0.0 {
                return Err(Error::InvalidParameter(
                    "one-gamma needs delta > 0 (alpha = beta/delta)".into(),
                ));
            }
            (beta / delta, 1.0)
        }
        ConstraintMode::TrOpt => {
            if delta <= 0.0 {
                return Err(Error::InvalidParameter("tropt needs delta > 0".into()));
            }
            if !(t_low > 0.0 && t_low < 1.0) {
                return Err(Error::InvalidParameter(format!("t_low must lie in (0, 1), got {t_low}")));
            }
            let n = geometry.n_rows.max(geometry.n_cols) as f64;
            let scale = -2.0 * PI * geometry.pixel_width_m * n / (geometry.wavelength_m * t_low.ln());
            (scale * beta, scale * delta)
        }
    };
    let params = ConstraintParams {
        alpha,
        gamma,
        mode,
        t_low,
    };
    params.validate()?;
    Ok(params)
}
