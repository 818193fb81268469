//! JSON experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::deterministic::OmegaThresholds;
use crate::error::{Error, Result};
use crate::model::{ExactParams, GeneralCubicCoeffs, ModelParams, Scalar};
use crate::ode::{IntegratorConfig, State};
use crate::poly::{parse_poly, SparsePoly};
use crate::stochastic::{EnsembleConfig, InitialCondition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Verify,
    Equilibria,
    SimulateOde,
    SimulateSde,
    Ensemble,
    Density,
    Sweep,
    Figure1,
}

impl Mode {
    fn needs_seed(self) -> bool {
        matches!(self, Mode::SimulateSde | Mode::Ensemble | Mode::Sweep)
    }

    fn default_horizon(self) -> f64 {
        match self {
            Mode::Figure1 => 200.0,
            Mode::SimulateSde => 1.0,
            _ => 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ModelSpec {
    Canonical(ExactParams),
    General(GeneralCubicCoeffs),
    /// Three polynomial components of arbitrary degree.
    Field([SparsePoly; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Rk4,
    Rk45,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    alpha: Option<[Scalar; 3]>,
    d: Option<[Scalar; 3]>,
    general: Option<GeneralCubicCoeffs>,
    field: Option<[String; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    model: Option<ModelJson>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    dt: Option<f64>,
    method: Option<MethodKind>,
    rtol: Option<f64>,
    atol: Option<f64>,
    record_every: Option<usize>,
    x0: Option<State>,
    sigma: Option<f64>,
    sigma_grid: Option<Vec<f64>>,
    n_paths: Option<usize>,
    seed: Option<u64>,
    eps_abs: Option<f64>,
    burn_in: Option<f64>,
    sample_every: Option<f64>,
    tail_threshold: Option<f64>,
    bins: Option<usize>,
    hist_max: Option<f64>,
    initial: Option<InitialCondition>,
    thresholds: Option<OmegaThresholds>,
    n_starts: Option<usize>,
    axis: Option<usize>,
    x_max: Option<f64>,
    n_points: Option<usize>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    /// Zero-based coordinate whose growth rate defines the ray.
    pub axis: usize,
    pub x_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelSpec,
    pub horizon: f64,
    pub dt: f64,
    pub integrator: IntegratorConfig,
    pub x0: State,
    pub sigma: Option<f64>,
    pub sigma_grid: Vec<f64>,
    pub seed: Option<u64>,
    pub ensemble: EnsembleConfig,
    pub thresholds: OmegaThresholds,
    pub n_starts: usize,
    pub density: DensityGrid,
    pub output_dir: Option<PathBuf>,
    /// The document as given, echoed into manifests.
    pub source: Value,
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(path, format!("must be positive, got {v}")))
    }
}

fn parse_model(m: ModelJson) -> Result<ModelSpec> {
    let kinds = [m.alpha.is_some(), m.general.is_some(), m.field.is_some()];
    if kinds.iter().filter(|k| **k).count() != 1 {
        return Err(config_err("model", "give exactly one of `alpha` (with `d`), `general`, `field`"));
    }
    if m.d.is_some() && m.alpha.is_none() {
        return Err(config_err("model.d", "`d` requires `alpha`"));
    }
    if let Some(alpha) = m.alpha {
        let d = m.d.unwrap_or_else(|| std::array::from_fn(|_| Scalar(num_traits::Zero::zero())));
        return Ok(ModelSpec::Canonical(ExactParams { alpha: alpha.map(|s| s.0), d: d.map(|s| s.0) }));
    }
    if let Some(g) = m.general {
        return Ok(ModelSpec::General(g));
    }
    let texts = m.field.expect("checked above");
    let mut comps = Vec::with_capacity(3);
    for (i, t) in texts.iter().enumerate() {
        comps.push(parse_poly(t).map_err(|e| config_err(&format!("model.field[{i}]"), e.to_string()))?);
    }
    Ok(ModelSpec::Field(comps.try_into().expect("three components")))
}

/// Parses and validates a configuration document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let source: Value = serde_json::from_str(text).map_err(|e| config_err(".", e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig =
        serde_path_to_error::deserialize(de).map_err(|e| config_err(&e.path().to_string(), e.inner().to_string()))?;
    let mode = raw.mode;

    let model = parse_model(raw.model.ok_or_else(|| config_err("model", "missing"))?)?;
    if mode != Mode::Verify && !matches!(model, ModelSpec::Canonical(_)) {
        return Err(config_err("model", "this mode needs canonical parameters `alpha` and `d`"));
    }

    let horizon = positive("T", raw.horizon.unwrap_or(mode.default_horizon()))?;
    let dt = positive("dt", raw.dt.unwrap_or(1e-3))?;
    let record_every = raw.record_every.unwrap_or(1);
    if record_every == 0 {
        return Err(config_err("record_every", "must be at least 1"));
    }
    let integrator = match raw.method.unwrap_or(MethodKind::Rk4) {
        MethodKind::Rk4 => IntegratorConfig::rk4(dt, horizon),
        MethodKind::Rk45 => IntegratorConfig::rk45(
            positive("rtol", raw.rtol.unwrap_or(1e-10))?,
            positive("atol", raw.atol.unwrap_or(1e-12))?,
            horizon,
        ),
    }
    .record_every(record_every);

    let x0 = raw.x0.unwrap_or([0.5, 0.5, 0.5]);
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(config_err("x0", "must be finite"));
    }
    let sigma = raw.sigma.map(|s| positive("sigma", s)).transpose()?;
    if sigma.is_none() && matches!(mode, Mode::SimulateSde | Mode::Ensemble | Mode::Density) {
        return Err(config_err("sigma", "required in this mode"));
    }
    let sigma_grid = raw.sigma_grid.unwrap_or_default();
    for (i, &s) in sigma_grid.iter().enumerate() {
        positive(&format!("sigma_grid[{i}]"), s)?;
        if sigma_grid[..i].contains(&s) {
            return Err(config_err(&format!("sigma_grid[{i}]"), format!("duplicate value {s}")));
        }
    }
    if mode == Mode::Sweep && sigma_grid.is_empty() {
        return Err(config_err("sigma_grid", "must be a non-empty list"));
    }
    if mode.needs_seed() && raw.seed.is_none() {
        return Err(config_err("seed", "required: all randomness derives from an explicit seed"));
    }

    let defaults = EnsembleConfig::default();
    let ensemble = EnsembleConfig {
        n_paths: raw.n_paths.unwrap_or(defaults.n_paths),
        horizon,
        dt,
        master_seed: raw.seed.unwrap_or(0),
        eps_abs: raw.eps_abs.unwrap_or(defaults.eps_abs),
        initial: raw.initial.unwrap_or(defaults.initial),
        burn_in: raw.burn_in.unwrap_or(defaults.burn_in),
        sample_every: raw.sample_every.unwrap_or(defaults.sample_every),
        tail_threshold: raw.tail_threshold.unwrap_or(defaults.tail_threshold),
        bins: raw.bins.unwrap_or(defaults.bins),
        hist_max: raw.hist_max.unwrap_or(defaults.hist_max),
    };
    ensemble.validate()?;

    let density = DensityGrid {
        axis: raw.axis.unwrap_or(0),
        x_max: positive("x_max", raw.x_max.unwrap_or(3.0))?,
        n_points: raw.n_points.unwrap_or(301),
    };
    if density.axis > 2 {
        return Err(config_err("axis", "must be 0, 1 or 2"));
    }
    if density.n_points < 2 {
        return Err(config_err("n_points", "must be at least 2"));
    }
    let n_starts = raw.n_starts.unwrap_or(20);
    if n_starts == 0 {
        return Err(config_err("n_starts", "must be at least 1"));
    }

    Ok(ExperimentConfig {
        mode,
        model,
        horizon,
        dt,
        integrator,
        x0,
        sigma,
        sigma_grid,
        seed: raw.seed,
        ensemble,
        thresholds: raw.thresholds.unwrap_or_default(),
        n_starts,
        density,
        output_dir: raw.output_dir,
        source,
    })
}

impl ExperimentConfig {
    pub fn exact_params(&self) -> Option<&ExactParams> {
        match &self.model {
            ModelSpec::Canonical(p) => Some(p),
            _ => None,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.exact_params().map(ExactParams::to_f64).ok_or_else(|| config_err("model", "canonical parameters required"))
    }

    pub fn require_sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| config_err("sigma", "required in this mode"))
    }
}
