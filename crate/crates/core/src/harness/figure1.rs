//! Fans of trajectories for the two deterministic regimes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deterministic::{omega_limit_classify, OmegaLimit, OmegaThresholds};
use crate::equilibria::{classify_regime_det, DetRegime, DetRegimeKind, EquilibriumLabel};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{integrate_ode, IntegratorConfig, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Interior,
    OnSphere,
    Axis,
}

impl StartKind {
    pub fn name(self) -> &'static str {
        match self {
            StartKind::Interior => "interior",
            StartKind::OnSphere => "sphere",
            StartKind::Axis => "axis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Options {
    /// Starts of each of the interior and on-sphere kinds.
    pub n_starts: usize,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: usize,
    pub thresholds: OmegaThresholds,
}

impl Default for Figure1Options {
    fn default() -> Self {
        Figure1Options {
            n_starts: 20,
            horizon: 200.0,
            dt: 1e-3,
            record_every: 10,
            thresholds: OmegaThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRun {
    pub kind: StartKind,
    pub index: usize,
    pub x0: State,
    #[serde(skip)]
    pub trajectory: Trajectory,
    /// Classification, or the reason it was refused.
    pub omega: std::result::Result<OmegaLimit, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Bundle {
    pub params: ModelParams,
    pub regime: DetRegime,
    /// The attracting boundary equilibrium, if any.
    pub attractor: Option<EquilibriumLabel>,
    pub runs: Vec<FigureRun>,
}

/// Deterministic directions in the open positive octant, kept away from the
/// coordinate planes.
pub fn octant_directions(n: usize) -> Vec<State> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64;
            let v = (k as f64 * GOLDEN).fract();
            let p = [0.15 + 0.7 * u, 0.15 + 0.7 * v, 0.5];
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            p.map(|c| c / r)
        })
        .collect()
}

pub fn figure1_starts(n: usize) -> Vec<(StartKind, State)> {
    let dirs = octant_directions(n);
    let mut out = Vec::with_capacity(2 * n + 3);
    for (k, d) in dirs.iter().enumerate() {
        let r = if k % 2 == 0 { 0.3 } else { 2.0 };
        out.push((StartKind::Interior, d.map(|c| r * c)));
    }
    for d in &dirs {
        out.push((StartKind::OnSphere, *d));
    }
    for i in 0..3 {
        let mut x = [0.0; 3];
        x[i] = 0.5;
        out.push((StartKind::Axis, x));
    }
    out
}

pub fn reproduce_figure1(params: &ModelParams, opts: &Figure1Options) -> Result<Figure1Bundle> {
    let regime = classify_regime_det(params)?;
    let attractor = match regime.kind {
        DetRegimeKind::NotCovered => {
            return Err(Error::Hypothesis(format!("the parameters {params} are outside both deterministic regimes")))
        }
        DetRegimeKind::CenterOnSphere => None,
        DetRegimeKind::BoundaryAttractor(i) => Some(EquilibriumLabel::boundary(i)),
    };
    let cfg = IntegratorConfig::rk4(opts.dt, opts.horizon).record_every(opts.record_every);
    let starts = figure1_starts(opts.n_starts);
    let runs = starts
        .par_iter()
        .enumerate()
        .map(|(k, &(kind, x0))| {
            let trajectory = integrate_ode(params, x0, &cfg)?;
            let omega = omega_limit_classify(&trajectory, params, &opts.thresholds).map_err(|e| e.to_string());
            let index = starts[..k].iter().filter(|s| s.0 == kind).count();
            Ok(FigureRun { kind, index, x0, trajectory, omega })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Figure1Bundle { params: *params, regime, attractor, runs })
}
