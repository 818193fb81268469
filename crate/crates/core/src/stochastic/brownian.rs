//! Reproducible Brownian increments.
//!
//! Step `k` of the path keyed by `seed` always consumes words `4k..4k+4` of
//! the ChaCha8 stream seeded with `seed`, turned into one standard normal by
//! Box–Muller. A path can therefore be generated sequentially or sampled at
//! an arbitrary step index with identical results.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::step_count;

fn unit_open(bits: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below is finite.
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seed of path `index` in an ensemble keyed by `master`.
pub fn path_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Sequential generator of `(step length, increment)` pairs.
#[derive(Debug, Clone)]
pub struct IncrementStream {
    rng: ChaCha8Rng,
    dt: f64,
    horizon: f64,
    n: usize,
    k: usize,
}

impl IncrementStream {
    pub fn new(seed: u64, horizon: f64, dt: f64) -> Result<Self> {
        check_grid(horizon, dt)?;
        Ok(IncrementStream { rng: ChaCha8Rng::seed_from_u64(seed), dt, horizon, n: step_count(horizon, dt), k: 0 })
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    fn step_len(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.horizon - k as f64 * self.dt
        } else {
            self.dt
        }
    }
}

impl Iterator for IncrementStream {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        if self.k >= self.n {
            return None;
        }
        let h = self.step_len(self.k);
        self.k += 1;
        Some((h, h.sqrt() * box_muller(&mut self.rng)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.n - self.k;
        (r, Some(r))
    }
}

impl ExactSizeIterator for IncrementStream {}

fn check_grid(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Invalid(format!("T must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// A stored Wiener path on the grid `0, dt, 2dt, ..., T`. When `T` is not a
/// multiple of `dt` the last step is shortened and its increment variance
/// shrinks with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub increments: Vec<f64>,
}

impl BrownianPath {
    pub fn sample(seed: u64, horizon: f64, dt: f64) -> Result<Self> {
        let increments = IncrementStream::new(seed, horizon, dt)?.map(|(_, dw)| dw).collect();
        Ok(BrownianPath { seed, dt, horizon, increments })
    }

    /// Increment `k` without generating the preceding ones.
    pub fn increment_at(seed: u64, horizon: f64, dt: f64, k: usize) -> Result<f64> {
        let mut s = IncrementStream::new(seed, horizon, dt)?;
        if k >= s.n {
            return Err(Error::Invalid(format!("step {k} beyond path length {}", s.n)));
        }
        s.rng.set_word_pos(4 * k as u128);
        Ok(s.step_len(k).sqrt() * box_muller(&mut s.rng))
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn step_len(&self, k: usize) -> f64 {
        if k + 1 == self.len() {
            self.horizon - k as f64 * self.dt
        } else {
            self.dt
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.len() {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// `W` at every grid point, starting with `W(0) = 0`.
    pub fn values(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    /// The same realization on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.len().is_multiple_of(factor) {
            return Err(Error::Invalid(format!("cannot coarsen {} steps by a factor of {factor}", self.len())));
        }
        Ok(BrownianPath {
            seed: self.seed,
            dt: self.dt * factor as f64,
            horizon: self.horizon,
            increments: self.increments.chunks(factor).map(|c| c.iter().sum()).collect(),
        })
    }

    /// `(step length, increment)` pairs, the input format of the integrators.
    pub fn steps(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        self.increments.iter().enumerate().map(|(k, &dw)| (self.step_len(k), dw))
    }
}
