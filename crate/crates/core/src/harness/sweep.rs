use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::stochastic::regime::{classify_noise_regime, noise_thresholds, NoiseRegime};
use crate::stochastic::{run_ensemble, EnsembleConfig, EnsembleSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    /// `None` for critical rows.
    pub regime: Option<NoiseRegime>,
    pub critical: bool,
    pub summary: Option<EnsembleSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub rows: Vec<SweepRow>,
}

/// One ensemble per noise level. The grid must reach across at least one
/// regime threshold; points sitting on a threshold are flagged and skipped.
pub fn run_sweep(params: &ModelParams, grid: &[f64], cfg: &EnsembleConfig) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::Config { path: "sigma_grid".into(), msg: "empty grid".into() });
    }
    let (lower, upper) = noise_thresholds(params);
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ![lower, upper].iter().any(|&t| lo <= t && t <= hi) {
        return Err(Error::Config {
            path: "sigma_grid".into(),
            msg: format!("grid [{lo}, {hi}] does not reach across a threshold ({lower}, {upper})"),
        });
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &sigma in grid {
        match classify_noise_regime(params, sigma) {
            Ok(label) => {
                let summary = run_ensemble(params, sigma, cfg)?;
                rows.push(SweepRow { sigma, regime: Some(label.kind), critical: false, summary: Some(summary) });
            }
            Err(Error::CriticalNoise(_)) => {
                rows.push(SweepRow { sigma, regime: None, critical: true, summary: None });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SweepReport { lower_threshold: lower, upper_threshold: upper, rows })
}
