use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Distance from a threshold below which a noise level counts as critical.
pub const CRITICAL_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseRegime {
    /// Every path is absorbed at the origin.
    AbsorbAtOrigin,
    /// The origin coexists with rays of the fastest-growing coordinates.
    Intermediate,
    /// Every coordinate axis carries a stationary ray measure.
    FullRays,
}

impl fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub kind: NoiseRegime,
    /// `sqrt(2 min alpha)`.
    pub lower: f64,
    /// `sqrt(2 max alpha)`.
    pub upper: f64,
}

pub fn noise_thresholds(params: &ModelParams) -> (f64, f64) {
    ((2.0 * params.alpha_min()).sqrt(), (2.0 * params.alpha_max()).sqrt())
}

pub fn classify_noise_regime(params: &ModelParams, sigma: f64) -> Result<RegimeLabel> {
    if !params.all_alpha_positive() {
        return Err(Error::Hypothesis(format!("noise regimes need alpha_i > 0, got {:?}", params.alpha)));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
    }
    let (lower, upper) = noise_thresholds(params);
    if (sigma - lower).abs() <= CRITICAL_BAND || (sigma - upper).abs() <= CRITICAL_BAND {
        return Err(Error::CriticalNoise(sigma));
    }
    let kind = if sigma > upper {
        NoiseRegime::AbsorbAtOrigin
    } else if sigma > lower {
        NoiseRegime::Intermediate
    } else {
        NoiseRegime::FullRays
    };
    Ok(RegimeLabel { kind, lower, upper })
}
