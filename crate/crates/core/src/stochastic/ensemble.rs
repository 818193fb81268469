//! Monte Carlo ensembles of Euler–Maruyama paths.
//!
//! Path `i` draws its increments from [`path_seed`]`(master, i)` and, when
//! the initial condition is random, its starting point from a second stream
//! of the same seed. Outcomes are collected in index order and reduced
//! sequentially, so summaries do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brownian::{path_seed, IncrementStream};
use super::regime::{classify_noise_regime, RegimeLabel};
use super::sde::euler_maruyama_stream;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::State;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Fixed {
        x0: State,
    },
    /// Uniform direction in the open positive octant, radius uniform in
    /// `[r_min, r_max]`.
    Shell {
        r_min: f64,
        r_max: f64,
    },
    /// `value` on coordinate `axis` (zero-based), zero elsewhere.
    Axis {
        axis: usize,
        value: f64,
    },
}

impl InitialCondition {
    fn draw(&self, rng: &mut ChaCha8Rng) -> State {
        match *self {
            InitialCondition::Fixed { x0 } => x0,
            InitialCondition::Axis { axis, value } => {
                let mut x = [0.0; 3];
                x[axis] = value;
                x
            }
            InitialCondition::Shell { r_min, r_max } => {
                let g: State = [0, 1, 2].map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    v.abs().max(1e-12)
                });
                let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                let r = rng.gen_range(r_min..=r_max);
                g.map(|v| r * v / n)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Fixed { x0 } if x0.iter().all(|v| v.is_finite()) => Ok(()),
            InitialCondition::Axis { axis, value } if axis < 3 && value.is_finite() => Ok(()),
            InitialCondition::Shell { r_min, r_max } if 0.0 < r_min && r_min <= r_max && r_max.is_finite() => Ok(()),
            ic => Err(Error::Invalid(format!("invalid initial condition {ic:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub eps_abs: f64,
    pub initial: InitialCondition,
    /// Tail samples are taken from this time on...
    pub burn_in: f64,
    /// ...at this spacing.
    pub sample_every: f64,
    /// Tail samples of `|x_i|` above this count toward `tail_mass_above`.
    pub tail_threshold: f64,
    pub bins: usize,
    pub hist_max: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_paths: 500,
            horizon: 50.0,
            dt: 1e-3,
            master_seed: 0,
            eps_abs: 1e-4,
            initial: InitialCondition::Shell { r_min: 0.5, r_max: 1.5 },
            burn_in: 100.0,
            sample_every: 0.1,
            tail_threshold: 1e-3,
            bins: 50,
            hist_max: 2.5,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config { path: name.into(), msg: format!("must be positive, got {v}") })
            }
        };
        pos("T", self.horizon)?;
        pos("dt", self.dt)?;
        pos("eps_abs", self.eps_abs)?;
        pos("sample_every", self.sample_every)?;
        pos("tail_threshold", self.tail_threshold)?;
        pos("hist_max", self.hist_max)?;
        if self.burn_in.is_nan() || self.burn_in < 0.0 {
            return Err(Error::Config { path: "burn_in".into(), msg: "must be non-negative".into() });
        }
        if self.bins == 0 {
            return Err(Error::Config { path: "bins".into(), msg: "must be at least 1".into() });
        }
        self.initial.validate()
    }
}

/// Equal-width histogram on `[0, max]`; values beyond `max` go to the last
/// bin and are also counted in `clamped`, so masses always sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub max: f64,
    pub counts: Vec<u64>,
    pub clamped: u64,
}

impl Histogram {
    pub fn new(bins: usize, max: f64) -> Self {
        Histogram { max, counts: vec![0; bins], clamped: 0 }
    }

    pub fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let raw = (v / self.max * bins as f64).floor();
        let idx = if raw >= bins as f64 {
            self.clamped += 1;
            bins - 1
        } else {
            raw.max(0.0) as usize
        };
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn masses(&self) -> Vec<f64> {
        let n = self.total();
        if n == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let w = self.max / self.counts.len() as f64;
        (0..=self.counts.len()).map(|i| i as f64 * w).collect()
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.clamped += other.clamped;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub index: usize,
    pub seed: u64,
    pub x0: State,
    pub end: Option<State>,
    pub blow_up_step: Option<usize>,
    /// Per coordinate: tail samples and how many exceeded the threshold.
    pub tail_counts: [(u64, u64); 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub regime: RegimeLabel,
    pub sigma: f64,
    pub n_paths: usize,
    pub completed: usize,
    pub blown_up: Vec<usize>,
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub eps_abs: f64,
    /// `None` when no path completed.
    pub absorption_fraction: Option<f64>,
    /// Fraction of endpoints with `|x_i(T)| < eps_abs`, per coordinate.
    pub extinction_fraction: [Option<f64>; 3],
    /// Fraction of endpoints on ray `i`: `|x_i| >= eps_abs`, the others below.
    pub ray_mass: [Option<f64>; 3],
    /// Endpoints with at least two coordinates at or above `eps_abs`.
    pub interior_mass: Option<f64>,
    /// Fraction of tail samples with `|x_i| > tail_threshold`.
    pub tail_mass_above: [Option<f64>; 3],
    pub endpoint_histograms: [Histogram; 3],
    pub tail_histograms: [Histogram; 3],
}

struct PathRun {
    outcome: PathOutcome,
    end_hist: [Histogram; 3],
    tail_hist: [Histogram; 3],
}

fn run_path(params: &ModelParams, sigma: f64, cfg: &EnsembleConfig, index: usize) -> Result<PathRun> {
    let seed = path_seed(cfg.master_seed, index as u64);
    let mut ic_rng = ChaCha8Rng::seed_from_u64(seed);
    ic_rng.set_stream(1);
    let x0 = cfg.initial.draw(&mut ic_rng);
    let steps = IncrementStream::new(seed, cfg.horizon, cfg.dt)?;

    let hist = || [0, 1, 2].map(|_| Histogram::new(cfg.bins, cfg.hist_max));
    let mut tail_hist = hist();
    let mut end_hist = hist();
    let mut tail_counts = [(0u64, 0u64); 3];
    let mut next_sample = cfg.burn_in;
    let eps_t = 1e-9 * cfg.dt;
    let result = euler_maruyama_stream(params, sigma, x0, steps, |_, t, x| {
        if t + eps_t >= next_sample {
            for i in 0..3 {
                let v = x[i].abs();
                tail_hist[i].add(v);
                tail_counts[i].0 += 1;
                if v > cfg.tail_threshold {
                    tail_counts[i].1 += 1;
                }
            }
            next_sample += cfg.sample_every;
        }
    });
    let (end, blow_up_step) = match result {
        Ok(x) => {
            for i in 0..3 {
                end_hist[i].add(x[i].abs());
            }
            (Some(x), None)
        }
        Err(Error::BlowUp { step, .. }) => {
            tail_counts = [(0, 0); 3];
            tail_hist = hist();
            (None, Some(step))
        }
        Err(e) => return Err(e),
    };
    Ok(PathRun { outcome: PathOutcome { index, seed, x0, end, blow_up_step, tail_counts }, end_hist, tail_hist })
}

/// Per-path outcomes in index order, for callers that need more than the
/// summary.
pub fn run_paths(params: &ModelParams, sigma: f64, cfg: &EnsembleConfig) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    let runs: Result<Vec<PathRun>> =
        (0..cfg.n_paths).into_par_iter().map(|i| run_path(params, sigma, cfg, i)).collect();
    Ok(runs?.into_iter().map(|r| r.outcome).collect())
}

pub fn run_ensemble(params: &ModelParams, sigma: f64, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    let regime = classify_noise_regime(params, sigma)?;
    cfg.validate()?;
    let runs: Vec<PathRun> =
        (0..cfg.n_paths).into_par_iter().map(|i| run_path(params, sigma, cfg, i)).collect::<Result<_>>()?;

    let mut endpoint_histograms = [0, 1, 2].map(|_| Histogram::new(cfg.bins, cfg.hist_max));
    let mut tail_histograms = endpoint_histograms.clone();
    let mut blown_up = Vec::new();
    let mut completed = 0usize;
    let (mut absorbed, mut interior) = (0usize, 0usize);
    let mut extinct = [0usize; 3];
    let mut rays = [0usize; 3];
    let mut tail = [(0u64, 0u64); 3];
    for run in &runs {
        let o = &run.outcome;
        let Some(x) = o.end else {
            blown_up.push(o.index);
            continue;
        };
        completed += 1;
        for i in 0..3 {
            endpoint_histograms[i].merge(&run.end_hist[i]);
            tail_histograms[i].merge(&run.tail_hist[i]);
            tail[i].0 += o.tail_counts[i].0;
            tail[i].1 += o.tail_counts[i].1;
        }
        let alive = x.map(|v| v.abs() >= cfg.eps_abs);
        for i in 0..3 {
            if !alive[i] {
                extinct[i] += 1;
            }
        }
        let n_alive = alive.iter().filter(|a| **a).count();
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() < cfg.eps_abs {
            absorbed += 1;
        }
        if n_alive == 1 {
            rays[alive.iter().position(|a| *a).expect("one alive")] += 1;
        } else if n_alive >= 2 {
            interior += 1;
        }
    }
    let frac = |k: usize| (completed > 0).then(|| k as f64 / completed as f64);
    Ok(EnsembleSummary {
        regime,
        sigma,
        n_paths: cfg.n_paths,
        completed,
        blown_up,
        horizon: cfg.horizon,
        dt: cfg.dt,
        master_seed: cfg.master_seed,
        eps_abs: cfg.eps_abs,
        absorption_fraction: frac(absorbed),
        extinction_fraction: extinct.map(frac),
        ray_mass: rays.map(frac),
        interior_mass: frac(interior),
        tail_mass_above: tail.map(|(n, k)| (n > 0).then(|| k as f64 / n as f64)),
        endpoint_histograms,
        tail_histograms,
    })
}

/// Sampling times `burn_in + j * sample_every`, `j = 0..n_samples`, on an
/// Euler grid of step `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSchedule {
    pub dt: f64,
    pub burn_in: f64,
    pub sample_every: f64,
    pub n_samples: usize,
}

/// Tail samples of one path.
pub fn sample_tail(
    params: &ModelParams,
    sigma: f64,
    x0: State,
    seed: u64,
    schedule: TailSchedule,
) -> Result<Vec<State>> {
    let TailSchedule { dt, burn_in, sample_every, n_samples } = schedule;
    if n_samples == 0 {
        return Ok(Vec::new());
    }
    let horizon = burn_in + (n_samples - 1) as f64 * sample_every;
    let steps = IncrementStream::new(seed, horizon.max(dt), dt)?;
    let mut out = Vec::with_capacity(n_samples);
    let mut next = burn_in;
    let eps_t = 1e-9 * dt;
    if burn_in == 0.0 {
        out.push(x0);
        next += sample_every;
    }
    euler_maruyama_stream(params, sigma, x0, steps, |_, t, x| {
        if out.len() < n_samples && t + eps_t >= next {
            out.push(x);
            next += sample_every;
        }
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new([1.0, 2.0, 3.0], [0.0; 3])
    }

    fn small(seed: u64) -> EnsembleConfig {
        EnsembleConfig { n_paths: 16, horizon: 2.0, dt: 1e-2, master_seed: seed, burn_in: 1.0, ..Default::default() }
    }

    #[test]
    fn empty_ensemble_has_undefined_fractions() {
        let cfg = EnsembleConfig { n_paths: 0, ..small(1) };
        let s = run_ensemble(&params(), 1.0, &cfg).unwrap();
        assert_eq!(s.completed, 0);
        assert!(s.absorption_fraction.is_none());
        assert!(s.ray_mass.iter().all(Option::is_none));
    }

    #[test]
    fn deterministic_under_seed() {
        let a = run_ensemble(&params(), 2.0, &small(7)).unwrap();
        let b = run_ensemble(&params(), 2.0, &small(7)).unwrap();
        let c = run_ensemble(&params(), 2.0, &small(8)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a.endpoint_histograms, c.endpoint_histograms);
    }

    #[test]
    fn histogram_masses_sum_to_one() {
        let s = run_ensemble(&params(), 1.0, &small(3)).unwrap();
        for h in s.endpoint_histograms.iter().chain(&s.tail_histograms) {
            let m: f64 = h.masses().iter().sum();
            assert!((m - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.tail_histograms[0].total(), 16 * 11);
    }

    #[test]
    fn shell_draws_are_in_the_octant() {
        let ic = InitialCondition::Shell { r_min: 0.5, r_max: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = ic.draw(&mut rng);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!(x.iter().all(|v| *v > 0.0));
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn blow_ups_are_counted() {
        let cfg = EnsembleConfig {
            n_paths: 4,
            horizon: 3.0,
            dt: 0.5,
            initial: InitialCondition::Fixed { x0: [100.0, 0.0, 0.0] },
            ..small(1)
        };
        let s = run_ensemble(&params(), 1.0, &cfg).unwrap();
        assert_eq!(s.blown_up, vec![0, 1, 2, 3]);
        assert!(s.absorption_fraction.is_none());
    }

    #[test]
    fn tail_sampling_grid() {
        let xs = sample_tail(
            &params(),
            1.0,
            [0.5, 0.0, 0.0],
            3,
            TailSchedule { dt: 1e-2, burn_in: 1.0, sample_every: 0.1, n_samples: 5 },
        )
        .unwrap();
        assert_eq!(xs.len(), 5);
        assert!(xs.iter().all(|x| x[1] == 0.0 && x[2] == 0.0));
    }
}
