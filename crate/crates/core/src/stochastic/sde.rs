//! Itô SDE with linear multiplicative noise `sigma * x_i dW` and its
//! pathwise transform into a random ODE.

use serde::{Deserialize, Serialize};

use super::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{State, Trajectory};

/// Exponents above this would overflow `m_j = exp(2 phi_j)`.
const MAX_LOG_WEIGHT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    /// `d1 <= 0`, `d3 <= 0` and `alpha1 + alpha3 + d2 >= 0`: the hypotheses
    /// under which the transformed Lyapunov function decays.
    pub admissible: bool,
}

impl NoiseConfig {
    pub fn new(params: &ModelParams, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(NoiseConfig { sigma, admissible: admissibility_violations(params).is_empty() })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Invalid(format!("sigma must be a finite non-negative number, got {sigma}")));
    }
    Ok(())
}

pub fn admissibility_violations(params: &ModelParams) -> Vec<String> {
    let [a1, _, a3] = params.alpha;
    let [d1, d2, d3] = params.d;
    let mut v = Vec::new();
    if d1 > 0.0 {
        v.push(format!("d_1 <= 0 (d_1 = {d1})"));
    }
    if d3 > 0.0 {
        v.push(format!("d_3 <= 0 (d_3 = {d3})"));
    }
    if a1 + a3 + d2 < 0.0 {
        v.push(format!("alpha_1 + alpha_3 + d_2 >= 0 (value {})", a1 + a3 + d2));
    }
    v
}

#[inline]
pub fn em_step(params: &ModelParams, sigma: f64, x: State, h: f64, dw: f64) -> State {
    let b = params.drift(x);
    let s = sigma * dw;
    [x[0] + b[0] * h + s * x[0], x[1] + b[1] * h + s * x[1], x[2] + b[2] * h + s * x[2]]
}

/// Euler–Maruyama over `(step length, increment)` pairs, calling `visit` with
/// `(step index, time, state)` after every step. Returns the final state.
pub fn euler_maruyama_stream<I, V>(params: &ModelParams, sigma: f64, x0: State, steps: I, mut visit: V) -> Result<State>
where
    I: IntoIterator<Item = (f64, f64)>,
    V: FnMut(usize, f64, State),
{
    let mut x = x0;
    let mut t = 0.0;
    for (k, (h, dw)) in steps.into_iter().enumerate() {
        x = em_step(params, sigma, x, h, dw);
        t += h;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, t });
        }
        visit(k + 1, t, x);
    }
    Ok(x)
}

pub fn euler_maruyama(params: &ModelParams, sigma: f64, x0: State, path: &BrownianPath) -> Result<Trajectory> {
    check_sigma(sigma)?;
    let mut traj = Trajectory::with_capacity(path.len() + 1);
    traj.push(0.0, x0);
    euler_maruyama_stream(params, sigma, x0, path.steps(), |k, _, x| traj.push(path.time(k), x))?;
    Ok(traj)
}

struct Transform {
    b: [[f64; 3]; 3],
    drift: [f64; 3],
    sigma: f64,
}

impl Transform {
    fn new(params: &ModelParams, sigma: f64) -> Self {
        Transform { b: params.interaction_matrix(), drift: params.alpha.map(|a| a - 0.5 * sigma * sigma), sigma }
    }

    fn phi(&self, t: f64, w: f64) -> Result<[f64; 3]> {
        let phi = [0, 1, 2].map(|j| self.drift[j] * t + self.sigma * w);
        if phi.iter().any(|&p| 2.0 * p > MAX_LOG_WEIGHT) {
            return Err(Error::TransformOverflow { t });
        }
        Ok(phi)
    }

    /// `dy_i/dt = y_i * sum_j b_ij m_j y_j^2`, with `m_j y_j^2` evaluated
    /// as `(e^{phi_j} y_j)^2` so that it stays finite.
    fn rhs(&self, t: f64, w: f64, y: State) -> Result<State> {
        let phi = self.phi(t, w)?;
        let sq = [0, 1, 2].map(|j| (phi[j].exp() * y[j]).powi(2));
        Ok([0, 1, 2].map(|i| y[i] * (self.b[i][0] * sq[0] + self.b[i][1] * sq[1] + self.b[i][2] * sq[2])))
    }

    fn reconstruct(&self, t: f64, w: f64, y: State) -> Result<State> {
        let phi = self.phi(t, w)?;
        Ok([0, 1, 2].map(|i| phi[i].exp() * y[i]))
    }
}

fn add(x: State, h: f64, k: State) -> State {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2]]
}

/// Pathwise solution via `x_i = exp((alpha_i - sigma^2/2) t + sigma W_t) y_i`.
/// The random ODE for `y` is integrated with RK4, `W` linear within each step.
/// Returns `(y, x)` on the grid of `path`.
pub fn doss_sussmann(
    params: &ModelParams,
    sigma: f64,
    x0: State,
    path: &BrownianPath,
) -> Result<(Trajectory, Trajectory)> {
    check_sigma(sigma)?;
    let tr = Transform::new(params, sigma);
    let mut ys = Trajectory::with_capacity(path.len() + 1);
    let mut xs = Trajectory::with_capacity(path.len() + 1);
    let mut y = x0;
    let mut w = 0.0;
    ys.push(0.0, y);
    xs.push(0.0, x0);
    for (k, (h, dw)) in path.steps().enumerate() {
        let t = path.time(k);
        let (tm, wm) = (t + 0.5 * h, w + 0.5 * dw);
        let k1 = tr.rhs(t, w, y)?;
        let k2 = tr.rhs(tm, wm, add(y, 0.5 * h, k1))?;
        let k3 = tr.rhs(tm, wm, add(y, 0.5 * h, k2))?;
        let k4 = tr.rhs(t + h, w + dw, add(y, h, k3))?;
        y = [0, 1, 2].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        w += dw;
        let t1 = path.time(k + 1);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, t: t1 });
        }
        ys.push(t1, y);
        xs.push(t1, tr.reconstruct(t1, w, y)?);
    }
    Ok((ys, xs))
}

/// Itô generator applied to `V(x) = |x|^2`: `2 <x, b(x)> + sigma^2 |x|^2`.
pub fn generator_v(params: &ModelParams, sigma: f64, x: State) -> f64 {
    let b = params.drift(x);
    let inner = x[0] * b[0] + x[1] * b[1] + x[2] * b[2];
    let v = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    2.0 * inner + sigma * sigma * v
}

/// Right side of the linear bound `L V <= (2 max alpha + sigma^2) V`.
pub fn generator_bound(params: &ModelParams, sigma: f64, x: State) -> f64 {
    (2.0 * params.alpha_max() + sigma * sigma) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedDecayReport {
    pub samples: usize,
    /// Largest `dV/dt - (-2 m_min alpha_min V^2)` over the samples.
    pub max_excess: f64,
    pub first_violation: Option<usize>,
    pub bound_holds: bool,
    /// Largest increase `V(y_{k+1}) - V(y_k)` between consecutive samples.
    pub max_increase: f64,
    pub nonincreasing: bool,
}

/// Checks `dV/dt <= -2 m_min alpha_min V^2` along a transformed trajectory,
/// `V(y) = |y|^2`, where `m_min` is the weight of the smallest growth rate.
/// Requires the admissibility hypotheses and `alpha1 >= alpha2 >= alpha3`.
pub fn transformed_decay_check(
    params: &ModelParams,
    sigma: f64,
    y_traj: &Trajectory,
    path: &BrownianPath,
    tol: f64,
) -> Result<TransformedDecayReport> {
    let violations = admissibility_violations(params);
    if !violations.is_empty() {
        return Err(Error::Hypothesis(format!("violated: {}", violations.join("; "))));
    }
    let [a1, a2, a3] = params.alpha;
    if !(a1 >= a2 && a2 >= a3 && a3 > 0.0) {
        return Err(Error::Hypothesis(format!("alpha_1 >= alpha_2 >= alpha_3 > 0 required, got {:?}", params.alpha)));
    }
    if y_traj.len() != path.len() + 1 {
        return Err(Error::Invalid(format!(
            "trajectory has {} samples but the path has {} steps",
            y_traj.len(),
            path.len()
        )));
    }
    let tr = Transform::new(params, sigma);
    let w = path.values();
    let mut max_excess = f64::NEG_INFINITY;
    let mut first_violation = None;
    let mut max_increase = f64::NEG_INFINITY;
    let mut prev_v: Option<f64> = None;
    for (k, (&t, y)) in y_traj.times.iter().zip(&y_traj.states).enumerate() {
        let phi = tr.phi(t, w[k])?;
        let sq = [0, 1, 2].map(|j| (phi[j].exp() * y[j]).powi(2));
        let dv: f64 = 2.0
            * (0..3).map(|i| y[i] * y[i] * (tr.b[i][0] * sq[0] + tr.b[i][1] * sq[1] + tr.b[i][2] * sq[2])).sum::<f64>();
        let v = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let m_min = (2.0 * phi[2]).exp();
        let bound = -2.0 * m_min * a3 * v * v;
        let excess = dv - bound;
        if excess > tol && first_violation.is_none() {
            first_violation = Some(k);
        }
        max_excess = max_excess.max(excess);
        if let Some(p) = prev_v {
            max_increase = max_increase.max(v - p);
        }
        prev_v = Some(v);
    }
    Ok(TransformedDecayReport {
        samples: y_traj.len(),
        max_excess,
        first_violation,
        bound_holds: first_violation.is_none(),
        max_increase,
        nonincreasing: max_increase <= tol,
    })
}
