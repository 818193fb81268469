//! Fixed-step RK4 and adaptive Dormand–Prince 5(4) integrators for
//! autonomous fields on R^3.

use serde::{Deserialize, Serialize};

use crate::equilibria::log_first_integral_unchecked;
use crate::error::{Error, Result};
use crate::model::{CompiledField, ModelParams};

pub type State = [f64; 3];

pub trait VectorField {
    fn eval(&self, x: State) -> State;
}

impl VectorField for ModelParams {
    #[inline]
    fn eval(&self, x: State) -> State {
        self.drift(x)
    }
}

impl VectorField for CompiledField {
    fn eval(&self, x: State) -> State {
        CompiledField::eval(self, x)
    }
}

impl<F: Fn(State) -> State> VectorField for F {
    fn eval(&self, x: State) -> State {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Rk4 { dt: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub horizon: f64,
    /// RK4 only: keep every n-th step (the final state is always kept).
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, horizon: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { dt }, horizon, record_every: 1 }
    }

    pub fn rk45(rtol: f64, atol: f64, horizon: f64) -> Self {
        IntegratorConfig { method: Method::Rk45 { rtol, atol }, horizon, record_every: 1 }
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos("T", self.horizon)?;
        match self.method {
            Method::Rk4 { dt } => pos("dt", dt),
            Method::Rk45 { rtol, atol } => pos("rtol", rtol).and(pos("atol", atol)),
        }
    }
}

/// Per-sample monitors: sphere defect `L`, log-form first integral `H`
/// (NaN where undefined) and Euclidean norm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Channels {
    pub sphere_defect: Vec<f64>,
    pub log_h: Vec<f64>,
    pub norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub channels: Option<Channels>,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Trajectory { times: Vec::with_capacity(n), states: Vec::with_capacity(n), channels: None }
    }

    pub fn push(&mut self, t: f64, x: State) {
        self.times.push(t);
        self.states.push(x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// Fill the monitor channels. `H` is only evaluated when `params` is given.
    pub fn with_monitors(mut self, params: Option<&ModelParams>) -> Self {
        let ch = Channels {
            sphere_defect: self.states.iter().map(|&x| sphere_defect(x)).collect(),
            log_h: self
                .states
                .iter()
                .map(|x| match params {
                    Some(p) => log_first_integral_unchecked(p, [x[0].abs(), x[1].abs()]),
                    None => f64::NAN,
                })
                .collect(),
            norm: self.states.iter().map(|&x| norm(x)).collect(),
        };
        self.channels = Some(ch);
        self
    }
}

#[inline]
pub fn sphere_defect(x: State) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0
}

#[inline]
pub fn norm(x: State) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

#[inline]
pub(crate) fn axpy(x: State, h: f64, k: State) -> State {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2]]
}

#[inline]
pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: State, h: f64) -> State {
    let k1 = f.eval(x);
    let k2 = f.eval(axpy(x, 0.5 * h, k1));
    let k3 = f.eval(axpy(x, 0.5 * h, k2));
    let k4 = f.eval(axpy(x, h, k3));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

pub fn integrate_ode<F: VectorField + ?Sized>(f: &F, x0: State, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    match cfg.method {
        Method::Rk4 { dt } => rk4(f, x0, dt, cfg.horizon, cfg.record_every),
        Method::Rk45 { rtol, atol } => dopri45(f, x0, rtol, atol, cfg.horizon),
    }
}

/// Number of steps of size `dt` covering `[0, horizon]`; tolerant of
/// floating round-off when `horizon / dt` is an integer.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

fn rk4<F: VectorField + ?Sized>(f: &F, x0: State, dt: f64, horizon: f64, every: usize) -> Result<Trajectory> {
    let n = step_count(horizon, dt);
    let mut traj = Trajectory::with_capacity(n / every + 2);
    traj.push(0.0, x0);
    let mut x = x0;
    for k in 0..n {
        let t = k as f64 * dt;
        let h = if k + 1 == n { horizon - t } else { dt };
        x = rk4_step(f, x, h);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, t: t + h });
        }
        if (k + 1) % every == 0 || k + 1 == n {
            let t_next = if k + 1 == n { horizon } else { (k + 1) as f64 * dt };
            traj.push(t_next, x);
        }
    }
    Ok(traj)
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri45<F: VectorField + ?Sized>(f: &F, x0: State, rtol: f64, atol: f64, horizon: f64) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(1024);
    traj.push(0.0, x0);
    let mut t = 0.0;
    let mut x = x0;
    let mut k1 = f.eval(x);
    let mut h = initial_step(x, k1, rtol, atol, horizon);
    let comb = |x: State, terms: &[(f64, State)], h: f64| -> State {
        std::array::from_fn(|i| x[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
    };
    while t < horizon {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, state: x });
        }
        let last = t + h >= horizon;
        if last {
            h = horizon - t;
        }
        let k2 = f.eval(comb(x, &[(A21, k1)], h));
        let k3 = f.eval(comb(x, &[(A31, k1), (A32, k2)], h));
        let k4 = f.eval(comb(x, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = f.eval(comb(x, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let k6 = f.eval(comb(x, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
        let xn = comb(x, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)], h);
        let k7 = f.eval(xn);
        let mut err = 0.0;
        for i in 0..3 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = atol + rtol * x[i].abs().max(xn[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / 3.0).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            t = if last { horizon } else { t + h };
            x = xn;
            k1 = k7;
            traj.push(t, x);
            if last {
                break;
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err <= 1.0 { factor } else { factor.min(1.0) };
    }
    Ok(traj)
}

fn initial_step(x: State, k: State, rtol: f64, atol: f64, horizon: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..3 {
        let sc = atol + rtol * x[i].abs();
        d0 += (x[i] / sc).powi(2);
        d1 += (k[i] / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * (d0 / d1).sqrt() };
    h.min(horizon).max(1e-12)
}
