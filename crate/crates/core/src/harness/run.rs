//! Runs one configured experiment and writes its artifacts.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Mode, ModelSpec};
use super::figure1::{reproduce_figure1, Figure1Options};
use super::output::{
    write_density_csv, write_histograms_csv, write_sde_csv, write_sweep_csv, write_trajectory_csv, Manifest, OutputDir,
};
use super::sweep::run_sweep;
use crate::deterministic::omega_limit_classify;
use crate::equilibria::{
    classify_regime_det, eigenvalue_mismatch, enumerate_equilibria, matrix_eigenvalues, DetRegime,
};
use crate::error::Result;
use crate::model::{
    build_general, canonical_coeffs, canonical_field, check_kolmogorov, check_sphere_conditions, darboux_residual_of,
    det_quantities, status_from_residual, ModelParams, SphereStatus,
};
use crate::ode::{integrate_ode, sphere_defect, State};
use crate::stochastic::{euler_maruyama, ray_stationary_density, run_ensemble, BrownianPath};

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub status: SphereStatus,
    pub invariant: bool,
    pub cofactor: String,
    pub remainder: String,
    /// Failed closed-form conditions (coefficient models), or a note on the
    /// nonzero remainder (free-form fields).
    pub violations: Vec<String>,
    pub kolmogorov: bool,
}

pub fn verify_model(model: &ModelSpec) -> VerifyReport {
    let (components, conditions) = match model {
        ModelSpec::Canonical(p) => {
            let c = canonical_coeffs(p);
            (build_general(&c).components().clone(), Some(check_sphere_conditions(&c)))
        }
        ModelSpec::General(c) => (build_general(c).components().clone(), Some(check_sphere_conditions(c))),
        ModelSpec::Field(f) => (f.clone(), None),
    };
    let (cofactor, remainder) = darboux_residual_of(&components);
    let status = status_from_residual(&cofactor, &remainder);
    let violations = match conditions {
        Some(c) => c.violations,
        None if status.is_invariant() => Vec::new(),
        None => vec![format!("remainder {remainder} != 0")],
    };
    VerifyReport {
        status,
        invariant: status.is_invariant(),
        cofactor: cofactor.to_string(),
        remainder: remainder.to_string(),
        violations,
        kolmogorov: check_kolmogorov(&components).is_ok(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumEntry {
    pub label: String,
    pub position: State,
    /// `[re, im]` pairs from the closed forms.
    pub eigenvalues: Vec<[f64; 2]>,
    pub jacobian_eigenvalues: Vec<[f64; 2]>,
    pub mismatch: f64,
    pub hyperbolic_sink: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriaReport {
    pub params: ModelParams,
    pub cross_rates: [f64; 3],
    pub s1: f64,
    pub s2: f64,
    pub regime: DetRegime,
    pub equilibria: Vec<EquilibriumEntry>,
}

pub fn equilibria_report(params: &ModelParams) -> Result<EquilibriaReport> {
    let field = canonical_field(&params.to_exact()?).compile();
    let regime = classify_regime_det(params)?;
    let (s1, s2) = det_quantities(params);
    let pairs = |v: &[num_complex::Complex64; 3]| v.iter().map(|z| [z.re, z.im]).collect();
    let equilibria = enumerate_equilibria(params)?
        .into_iter()
        .map(|e| {
            let numeric = matrix_eigenvalues(&field.jacobian(e.position));
            EquilibriumEntry {
                label: e.label.to_string(),
                position: e.position,
                eigenvalues: pairs(&e.eigenvalues),
                jacobian_eigenvalues: pairs(&numeric),
                mismatch: eigenvalue_mismatch(&e.eigenvalues, &numeric),
                hyperbolic_sink: e.eigenvalues.iter().all(|z| z.re < 0.0),
            }
        })
        .collect();
    Ok(EquilibriaReport { params: *params, cross_rates: params.cross_rates(), s1, s2, regime, equilibria })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Printed to stdout by the CLI.
    pub summary: Value,
    pub outputs: Vec<String>,
    /// False only when `verify` finds the sphere not invariant.
    pub success: bool,
}

pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunOutcome> {
    let mode_name = serde_json::to_value(cfg.mode)?.as_str().unwrap_or_default().to_string();
    let mut out = OutputDir::create(out_root)?;
    let mut success = true;
    let summary = match cfg.mode {
        Mode::Verify => {
            let report = verify_model(&cfg.model);
            success = report.invariant;
            out.write_json("certificate.json", &report)?;
            serde_json::to_value(&report)?
        }
        Mode::Equilibria => {
            let report = equilibria_report(&cfg.params()?)?;
            out.write_json("equilibria.json", &report)?;
            serde_json::to_value(&report)?
        }
        Mode::SimulateOde => {
            let params = cfg.params()?;
            let traj = integrate_ode(&params, cfg.x0, &cfg.integrator)?;
            out.write("trajectory.csv", |f| write_trajectory_csv(f, &traj, Some(&params)))?;
            let (t_end, x_end) = traj.last().expect("at least the initial state");
            let max_defect = traj.states.iter().map(|&x| sphere_defect(x).abs()).fold(0.0, f64::max);
            let omega = omega_limit_classify(&traj, &params, &cfg.thresholds);
            let s = json!({
                "samples": traj.len(),
                "t_end": t_end,
                "x_end": x_end,
                "L_end": sphere_defect(x_end),
                "max_abs_L": max_defect,
                "omega_limit": omega.as_ref().ok().map(|o| o.to_string()),
                "omega_limit_error": omega.as_ref().err().map(|e| e.to_string()),
            });
            out.write_json("summary.json", &s)?;
            s
        }
        Mode::SimulateSde => {
            let params = cfg.params()?;
            let sigma = cfg.require_sigma()?;
            let seed = cfg.seed.expect("validated");
            let path = BrownianPath::sample(seed, cfg.horizon, cfg.dt)?;
            let traj = euler_maruyama(&params, sigma, cfg.x0, &path)?;
            out.write("path.csv", |f| write_sde_csv(f, &traj, &path))?;
            let (t_end, x_end) = traj.last().expect("at least the initial state");
            let s = json!({
                "seed": seed,
                "steps": path.len(),
                "t_end": t_end,
                "x_end": x_end,
                "W_end": path.values().last(),
            });
            out.write_json("summary.json", &s)?;
            s
        }
        Mode::Ensemble => {
            let params = cfg.params()?;
            let summary = run_ensemble(&params, cfg.require_sigma()?, &cfg.ensemble)?;
            out.write_json("summary.json", &summary)?;
            out.write("histograms.csv", |f| write_histograms_csv(f, &summary))?;
            serde_json::to_value(&summary)?
        }
        Mode::Density => {
            let params = cfg.params()?;
            let grid = cfg.density;
            let density = ray_stationary_density(params.alpha[grid.axis], cfg.require_sigma()?)?;
            out.write("density.csv", |f| write_density_csv(f, &density, grid.x_max, grid.n_points))?;
            serde_json::to_value(density)?
        }
        Mode::Sweep => {
            let params = cfg.params()?;
            let report = run_sweep(&params, &cfg.sigma_grid, &cfg.ensemble)?;
            out.write("sweep.csv", |f| write_sweep_csv(f, &report))?;
            out.write_json("sweep.json", &report)?;
            serde_json::to_value(&report)?
        }
        Mode::Figure1 => {
            let params = cfg.params()?;
            let opts = Figure1Options {
                n_starts: cfg.n_starts,
                horizon: cfg.horizon,
                dt: cfg.dt,
                record_every: cfg.integrator.record_every.max(10),
                thresholds: cfg.thresholds,
            };
            let bundle = reproduce_figure1(&params, &opts)?;
            for run in &bundle.runs {
                let name = format!("figure1/{}_{:02}.csv", run.kind.name(), run.index);
                out.write(&name, |f| write_trajectory_csv(f, &run.trajectory, Some(&params)))?;
            }
            out.write_json("figure1.json", &bundle)?;
            serde_json::to_value(&bundle)?
        }
    };
    let manifest = Manifest::new(mode_name, cfg.source.clone(), cfg.seed);
    let outputs = out.finish(manifest)?;
    Ok(RunOutcome { summary, outputs, success })
}
