//! Monitors and ω-limit classification for trajectories of the canonical ODE.

use serde::{Deserialize, Serialize};

use crate::equilibria::{enumerate_equilibria, EquilibriumLabel};
use crate::error::{Error, Result};
use crate::model::{canonical_field, ExactParams, ModelParams};
use crate::ode::{norm, State, Trajectory};
use crate::poly::{rat, CompiledPoly, Monomial, SparsePoly};

pub use crate::ode::sphere_defect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LyapunovStatus {
    /// Started on the sphere; `L` stays zero and no rate is defined.
    OnSphere,
    Conclusive,
    /// The trajectory came within 1e-12 of the origin.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// `|L|` below this is treated as numerically zero. The default sits above
    /// the level where RK4 at `dt = 1e-3` stops resolving `L` (about 1e-12,
    /// where its truncation error balances the decay). The effective floor
    /// is never below the stall level of a fixed-step update, where
    /// `dt * dL/dt` drops under one ulp: `2 eps / (dt_min * alpha_min)`.
    pub floor: f64,
    /// Relative tolerance for `dL/dt = -2 (sum alpha_i x_i^2) L`, scaled by
    /// the largest right-hand side along the trajectory.
    pub identity_tol: f64,
    /// Monotonicity is checked from the first sample with `|x| >= shell`.
    pub shell: f64,
    pub on_sphere_tol: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { floor: 1e-11, identity_tol: 1e-3, shell: 0.1, on_sphere_tol: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub status: LyapunovStatus,
    pub max_identity_residual: f64,
    pub identity_holds: bool,
    /// `|L|` strictly decreasing from shell entry until it reaches the floor.
    pub monotone: bool,
    pub first_monotonicity_violation: Option<usize>,
    /// Effective `|L|` floor used for the monotonicity check.
    pub floor: f64,
    /// Average exponential decay rate of `|L|` over the resolved span.
    pub empirical_rate: Option<f64>,
    /// `2 * min(alpha) * min_t |x(t)|^2`.
    pub rate_bound: f64,
    pub min_norm: f64,
    pub rate_bound_holds: bool,
}

pub fn lyapunov_decay_report(
    traj: &Trajectory,
    params: &ModelParams,
    opts: &LyapunovOptions,
) -> Result<LyapunovReport> {
    if !params.all_alpha_positive() {
        return Err(Error::Hypothesis(format!("sphere attraction needs alpha_i > 0, got {:?}", params.alpha)));
    }
    if traj.len() < 3 {
        return Err(Error::Invalid("trajectory needs at least three samples".into()));
    }
    let l: Vec<f64> = traj.states.iter().map(|&x| sphere_defect(x)).collect();
    let norms: Vec<f64> = traj.states.iter().map(|&x| norm(x)).collect();
    let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let rate_bound = 2.0 * params.alpha_min() * min_norm * min_norm;

    if l[0].abs() <= opts.on_sphere_tol {
        return Ok(LyapunovReport {
            status: LyapunovStatus::OnSphere,
            max_identity_residual: 0.0,
            identity_holds: l.iter().all(|v| v.abs() <= 1e-9),
            monotone: true,
            first_monotonicity_violation: None,
            floor: opts.floor,
            empirical_rate: None,
            rate_bound,
            min_norm,
            rate_bound_holds: true,
        });
    }
    let status = if min_norm < 1e-12 { LyapunovStatus::Inconclusive } else { LyapunovStatus::Conclusive };

    let rhs: Vec<f64> = traj
        .states
        .iter()
        .zip(&l)
        .map(|(x, &lv)| {
            let w: f64 = (0..3).map(|i| params.alpha[i] * x[i] * x[i]).sum();
            -2.0 * w * lv
        })
        .collect();
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut max_res: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k - 1];
        let fd = (l[k + 1] - l[k - 1]) / dt;
        max_res = max_res.max((fd - rhs[k]).abs() / scale);
    }

    let dt_min = traj.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let floor = opts.floor.max(2.0 * f64::EPSILON / (dt_min * params.alpha_min()));
    let start = norms.iter().position(|&n| n >= opts.shell).unwrap_or(traj.len());
    let mut violation = None;
    let mut last_resolved = start;
    for k in start..traj.len().saturating_sub(1) {
        if l[k].abs() <= floor {
            break;
        }
        last_resolved = k + 1;
        if l[k + 1].abs() >= l[k].abs() && l[k + 1].abs() > floor {
            violation = Some(k + 1);
            break;
        }
    }
    // Rate over the span where |L| is resolved above the floor.
    let end = (start..=last_resolved.min(traj.len() - 1)).rev().find(|&k| l[k].abs() > floor).unwrap_or(start);
    let empirical_rate = if start < traj.len() && end > start {
        let span = traj.times[end] - traj.times[start];
        Some((l[start].abs().ln() - l[end].abs().ln()) / span)
    } else {
        None
    };
    let rate_bound_holds = empirical_rate.is_none_or(|r| r >= rate_bound * (1.0 - 1e-6) - 1e-9);

    Ok(LyapunovReport {
        status,
        max_identity_residual: max_res,
        identity_holds: max_res <= opts.identity_tol,
        monotone: violation.is_none(),
        first_monotonicity_violation: violation,
        floor,
        empirical_rate,
        rate_bound,
        min_norm,
        rate_bound_holds,
    })
}

/// Planar field in the chart `(x1, x2)` of the positive sphere octant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartField {
    /// Polynomials in `x1, x2` only.
    pub components: [SparsePoly; 2],
}

impl ChartField {
    pub fn compile(&self) -> CompiledChart {
        CompiledChart { components: self.components.each_ref().map(SparsePoly::compile) }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledChart {
    components: [CompiledPoly; 2],
}

impl CompiledChart {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let p = [x[0], x[1], 0.0];
        [self.components[0].eval(p), self.components[1].eval(p)]
    }

    /// As a field on R^3 with a frozen third coordinate, for the integrators.
    pub fn as_field(&self) -> impl Fn(State) -> State + '_ {
        move |x| {
            let v = self.eval([x[0], x[1]]);
            [v[0], v[1], 0.0]
        }
    }
}

/// Replace `x3^(2k)` by `(1 - x1^2 - x2^2)^k`; panics on odd powers of `x3`.
fn eliminate_x3_squared(p: &SparsePoly) -> SparsePoly {
    let w = SparsePoly::from_terms([
        (Monomial::ONE, rat(1)),
        (Monomial::new(2, 0, 0), rat(-1)),
        (Monomial::new(0, 2, 0), rat(-1)),
    ]);
    let mut out = SparsePoly::zero();
    for (m, c) in p.terms() {
        assert!(m.0[2] % 2 == 0, "odd power of x3 cannot be eliminated");
        let mut t = SparsePoly::term(c.clone(), Monomial::new(m.0[0], m.0[1], 0));
        for _ in 0..m.0[2] / 2 {
            t = &t * &w;
        }
        out = &out + &t;
    }
    out
}

/// Restriction of the canonical system to the sphere, written in `(x1, x2)`.
pub fn reduce_to_sphere_chart(params: &ExactParams) -> ChartField {
    let field = canonical_field(params);
    let c = field.components();
    ChartField { components: [eliminate_x3_squared(&c[0]), eliminate_x3_squared(&c[1])] }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaLimit {
    PeriodicOnSphere,
    Equilibrium(EquilibriumLabel),
    PolycycleApproach,
    Undetermined,
}

impl std::fmt::Display for OmegaLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OmegaLimit::Equilibrium(l) => write!(f, "Equilibrium({l})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Thresholds for [`omega_limit_classify`]. These are numerical choices,
/// not properties of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaThresholds {
    pub sphere_tol: f64,
    pub recurrence: f64,
    pub min_variance: f64,
    pub diameter: f64,
    pub equilibrium_radius: f64,
    pub boundary: f64,
    /// Fraction of the horizon treated as the tail.
    pub tail_fraction: f64,
    /// Fraction of the horizon used for the equilibrium diameter test.
    pub settle_fraction: f64,
    /// Time excluded after the recurrence reference point.
    pub exclusion_window: f64,
}

impl Default for OmegaThresholds {
    fn default() -> Self {
        OmegaThresholds {
            sphere_tol: 1e-6,
            recurrence: 1e-3,
            min_variance: 1e-6,
            diameter: 1e-6,
            equilibrium_radius: 1e-3,
            boundary: 1e-3,
            tail_fraction: 0.5,
            settle_fraction: 0.1,
            exclusion_window: 1.0,
        }
    }
}

fn dist(a: State, b: State) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn point_segment_distance(p: State, a: State, b: State) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let s = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]])
}

fn known_equilibria(params: &ModelParams) -> Vec<(EquilibriumLabel, State)> {
    match enumerate_equilibria(params) {
        Ok(eqs) => eqs.into_iter().map(|e| (e.label, e.position)).collect(),
        Err(_) => {
            let mut v = vec![(EquilibriumLabel::O, [0.0; 3])];
            for i in 0..3 {
                let mut p = [0.0; 3];
                p[i] = 1.0;
                v.push((EquilibriumLabel::boundary(i), p));
            }
            v
        }
    }
}

pub fn omega_limit_classify(traj: &Trajectory, params: &ModelParams, th: &OmegaThresholds) -> Result<OmegaLimit> {
    let (t_end, x_end) = traj.last().ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
    let defect = sphere_defect(x_end).abs();
    if defect.is_nan() || defect >= th.sphere_tol {
        return Err(Error::NotOnSphere(defect));
    }
    let abs = |x: State| x.map(f64::abs);

    // Equilibrium: tiny final excursion close to a known equilibrium.
    let settle_start = t_end * (1.0 - th.settle_fraction);
    let settled: Vec<State> =
        traj.times.iter().zip(&traj.states).filter(|(t, _)| **t >= settle_start).map(|(_, x)| *x).collect();
    let diameter = bounding_diagonal(&settled);
    if diameter < th.diameter {
        let end = abs(x_end);
        if let Some((label, _)) =
            known_equilibria(params).into_iter().find(|(_, p)| dist(*p, end) < th.equilibrium_radius)
        {
            return Ok(OmegaLimit::Equilibrium(label));
        }
    }

    let tail_start_t = t_end * (1.0 - th.tail_fraction);
    let k0 = traj.times.iter().position(|&t| t >= tail_start_t).unwrap_or(traj.len() - 1);
    let tail = &traj.states[k0..];
    let tail_times = &traj.times[k0..];

    // Recurrence to the first tail point, ignoring the initial window.
    let reference = tail[0];
    let k1 = tail_times.iter().position(|&t| t >= tail_times[0] + th.exclusion_window).unwrap_or(tail.len());
    let recurrence = tail[k1.max(1) - 1..]
        .windows(2)
        .skip(usize::from(k1 == 0))
        .map(|w| point_segment_distance(reference, w[0], w[1]))
        .fold(f64::INFINITY, f64::min);
    let variance = positional_variance(tail);
    if recurrence < th.recurrence && variance > th.min_variance {
        return Ok(OmegaLimit::PeriodicOnSphere);
    }

    // Dwell episodes near the boundary of the octant.
    let mut dwells = Vec::new();
    let mut entered: Option<f64> = None;
    for (t, x) in tail_times.iter().zip(tail) {
        let near = x.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min) < th.boundary;
        match (near, entered) {
            (true, None) => entered = Some(*t),
            (false, Some(t0)) => {
                dwells.push(t - t0);
                entered = None;
            }
            _ => {}
        }
    }
    if dwells.len() >= 3 && dwells.windows(2).all(|w| w[1] >= w[0]) {
        return Ok(OmegaLimit::PolycycleApproach);
    }
    Ok(OmegaLimit::Undetermined)
}

fn bounding_diagonal(xs: &[State]) -> f64 {
    if xs.is_empty() {
        return f64::INFINITY;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for x in xs {
        for i in 0..3 {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    dist(lo, hi)
}

fn positional_variance(xs: &[State]) -> f64 {
    let n = xs.len() as f64;
    let mut mean = [0.0; 3];
    for x in xs {
        for i in 0..3 {
            mean[i] += x[i] / n;
        }
    }
    xs.iter().map(|x| (0..3).map(|i| (x[i] - mean[i]).powi(2)).sum::<f64>()).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::qstar_position;
    use crate::ode::{integrate_ode, IntegratorConfig};
    use crate::poly::parse_poly;

    fn p(alpha: [f64; 3], d: [f64; 3]) -> ModelParams {
        ModelParams::new(alpha, d)
    }

    #[test]
    fn sphere_defect_examples() {
        assert_eq!(sphere_defect([1.0, 0.0, 0.0]), 0.0);
        assert_eq!(sphere_defect([0.0, 0.0, 0.0]), -1.0);
        assert_eq!(sphere_defect([1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn chart_for_unit_rates() {
        let params = p([1.0; 3], [0.0; 3]).to_exact().unwrap();
        let chart = reduce_to_sphere_chart(&params);
        assert_eq!(chart.components[0], parse_poly("x1 - x1^3 - 2*x1*x2^2").unwrap());
        assert_eq!(chart.components[1], parse_poly("-x2 + 2*x1^2*x2 + x2^3").unwrap());
    }

    #[test]
    fn chart_matches_closed_form_and_fixes_qstar() {
        let params = p([0.9, 1.6, 2.4], [0.3, -0.2, 0.5]);
        let chart = reduce_to_sphere_chart(&params.to_exact().unwrap()).compile();
        let [a, q, r] = params.cross_rates();
        let (x1, x2) = (0.4, 0.3);
        let v = chart.eval([x1, x2]);
        let e1 = x1 * (-a * x1 * x1 - (a + q) * x2 * x2 + a);
        let e2 = x2 * ((q + r) * x1 * x1 + r * x2 * x2 - r);
        assert!((v[0] - e1).abs() < 1e-14 && (v[1] - e2).abs() < 1e-14);

        let qs = qstar_position(&params).unwrap();
        let v = chart.eval([qs[0], qs[1]]);
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn on_sphere_report() {
        let params = p([1.0, 2.0, 3.0], [0.0; 3]);
        let x0 = [0.6, 0.8, 0.0];
        let tr = integrate_ode(&params, x0, &IntegratorConfig::rk4(1e-3, 5.0)).unwrap();
        let rep = lyapunov_decay_report(&tr, &params, &LyapunovOptions::default()).unwrap();
        assert_eq!(rep.status, LyapunovStatus::OnSphere);
        assert!(rep.empirical_rate.is_none());
    }

    #[test]
    fn axis_motion_matches_closed_form() {
        // x' = x (1 - x^2) has x(t)^2 = 1 / (1 + (1/x0^2 - 1) e^{-2t}).
        let params = p([1.0; 3], [0.0; 3]);
        let tr = integrate_ode(&params, [2.0, 0.0, 0.0], &IntegratorConfig::rk4(1e-3, 5.0)).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states).step_by(250) {
            let exact = 1.0 / (1.0 + (0.25 - 1.0) * (-2.0 * t).exp());
            assert!((x[0] * x[0] - exact).abs() < 1e-9);
            assert_eq!(x[1], 0.0);
        }
        let rep = lyapunov_decay_report(&tr, &params, &LyapunovOptions::default()).unwrap();
        assert_eq!(rep.status, LyapunovStatus::Conclusive);
        assert!(rep.monotone);
        assert!(rep.identity_holds, "residual {}", rep.max_identity_residual);
        assert!(rep.rate_bound_holds);
    }

    #[test]
    fn passing_through_origin_is_inconclusive() {
        let params = p([1.0; 3], [0.0; 3]);
        let tr = integrate_ode(&params, [0.0; 3], &IntegratorConfig::rk4(1e-2, 1.0)).unwrap();
        let rep = lyapunov_decay_report(&tr, &params, &LyapunovOptions::default()).unwrap();
        assert_eq!(rep.status, LyapunovStatus::Inconclusive);
    }

    #[test]
    fn negative_alpha_rejected() {
        let params = p([1.0, -1.0, 1.0], [0.0; 3]);
        let tr = integrate_ode(&params, [0.5; 3], &IntegratorConfig::rk4(1e-2, 1.0)).unwrap();
        assert!(lyapunov_decay_report(&tr, &params, &LyapunovOptions::default()).is_err());
    }

    #[test]
    fn omega_limit_examples() {
        let th = OmegaThresholds::default();
        let center = p([1.0, 2.0, 3.0], [0.0; 3]);
        let s = (1.0f64 - 0.5 * 0.5 - 0.3 * 0.3).sqrt();
        let tr = integrate_ode(&center, [0.5, 0.3, s], &IntegratorConfig::rk4(1e-3, 200.0)).unwrap();
        assert_eq!(omega_limit_classify(&tr, &center, &th).unwrap(), OmegaLimit::PeriodicOnSphere);

        let q = qstar_position(&center).unwrap();
        let tr = integrate_ode(&center, q, &IntegratorConfig::rk4(1e-2, 50.0)).unwrap();
        assert_eq!(omega_limit_classify(&tr, &center, &th).unwrap(), OmegaLimit::Equilibrium(EquilibriumLabel::QStar));

        let boundary = p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0]);
        let tr = integrate_ode(&boundary, [0.3, 0.2, 0.4], &IntegratorConfig::rk4(1e-3, 200.0)).unwrap();
        assert_eq!(omega_limit_classify(&tr, &boundary, &th).unwrap(), OmegaLimit::Equilibrium(EquilibriumLabel::E2));
    }

    #[test]
    fn omega_limit_requires_sphere() {
        let params = p([1.0; 3], [0.0; 3]);
        let tr = integrate_ode(&params, [0.1, 0.1, 0.1], &IntegratorConfig::rk4(1e-2, 0.5)).unwrap();
        assert!(matches!(omega_limit_classify(&tr, &params, &OmegaThresholds::default()), Err(Error::NotOnSphere(_))));
    }
}
