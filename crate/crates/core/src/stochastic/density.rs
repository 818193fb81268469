//! Stationary density of the one-dimensional SDE on a coordinate ray,
//! `dx = (alpha x - alpha x^3) dt + sigma x dW`.
//!
//! The zero-flux solution of the Fokker–Planck equation is
//! `p(x) ∝ x^k exp(-c x^2)` with `k = 2 alpha / sigma^2 - 2` and
//! `c = alpha / sigma^2`; it is normalizable exactly when `k > -1`.

use serde::{Deserialize, Serialize};

use super::quad::integrate;
use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayDensity {
    pub alpha: f64,
    pub sigma: f64,
    /// Power of `x` in the unnormalized density.
    pub exponent: f64,
    /// Gaussian rate `c` in `exp(-c x^2)`.
    pub rate: f64,
    /// Logarithm of the normalizing integral.
    pub log_norm: f64,
    /// Shift applied inside the integrands to keep them in range.
    shift: f64,
}

pub fn ray_stationary_density(alpha: f64, sigma: f64) -> Result<RayDensity> {
    if !(alpha > 0.0 && alpha.is_finite() && sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Invalid(format!(
            "ray density needs alpha > 0 and sigma > 0, got alpha = {alpha}, sigma = {sigma}"
        )));
    }
    let s2 = sigma * sigma;
    if s2 >= 2.0 * alpha {
        return Err(Error::NoStationaryDensity { sigma_sq: s2, two_alpha: 2.0 * alpha });
    }
    let k = 2.0 * alpha / s2 - 2.0;
    let c = alpha / s2;
    // Log of the mode value when k > 0; avoids underflow for weak noise.
    let shift = if k > 0.0 { 0.5 * k * (k / (2.0 * c)).ln() - 0.5 * k } else { 0.0 };
    let mut d = RayDensity { alpha, sigma, exponent: k, rate: c, log_norm: 0.0, shift };
    let z = d.mass_below_one(1.0)? + d.mass_above_one(f64::INFINITY)?;
    d.log_norm = z.ln() + shift;
    Ok(d)
}

impl RayDensity {
    fn log_unnormalized(&self, x: f64) -> f64 {
        self.exponent * x.ln() - self.rate * x * x
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (self.log_unnormalized(x) - self.log_norm).exp()
    }

    /// Shifted unnormalized mass of `[0, x]`, `x <= 1`, after substituting
    /// `u = x^(k+1)` to remove the singularity at the origin.
    fn mass_below_one(&self, x: f64) -> Result<f64> {
        let kp1 = self.exponent + 1.0;
        let (c, shift) = (self.rate, self.shift);
        let g = move |u: f64| (-c * u.powf(2.0 / kp1) - shift).exp() / kp1;
        integrate(g, 0.0, x.powf(kp1), REL_TOL, 0.0)
    }

    /// Shifted unnormalized mass of `[1, x]`, mapped onto `[0, 1)` by
    /// `x = 1 + s / (1 - s)`.
    fn mass_above_one(&self, x: f64) -> Result<f64> {
        let s_max = if x.is_finite() { (x - 1.0) / x } else { 1.0 };
        let g = |s: f64| {
            let one_minus = 1.0 - s;
            let x = 1.0 + s / one_minus;
            (self.log_unnormalized(x) - self.shift).exp() / (one_minus * one_minus)
        };
        integrate(g, 0.0, s_max, REL_TOL, 0.0)
    }

    fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let g = |x: f64| (self.log_unnormalized(x) - self.log_norm).exp();
        integrate(g, a, b, REL_TOL, 1e-300)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let scale = (self.shift - self.log_norm).exp();
        let m = if x <= 1.0 { self.mass_below_one(x)? } else { self.mass_below_one(1.0)? + self.mass_above_one(x)? };
        Ok((m * scale).min(1.0))
    }

    /// Kolmogorov–Smirnov distance between the empirical distribution of
    /// `samples` and this density. The CDF is accumulated along the sorted
    /// samples, one short quadrature per gap.
    pub fn ks_distance(&self, samples: &[f64]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Invalid("no samples for the KS distance".into()));
        }
        let mut xs: Vec<f64> = samples.to_vec();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        let mut prev = xs[0];
        let mut f = self.cdf(prev)?;
        for (i, &x) in xs.iter().enumerate() {
            if x > prev {
                f = (f + self.mass_between(prev.max(0.0), x)?).min(1.0);
                prev = x;
            }
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d = d.max((f - lo).abs()).max((hi - f).abs());
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_gaussian_at_unit_parameters() {
        let d = ray_stationary_density(1.0, 1.0).unwrap();
        assert_eq!(d.exponent, 0.0);
        let expect = 2.0 / std::f64::consts::PI.sqrt();
        for x in [0.1, 0.5, 1.0, 2.0] {
            assert!((d.pdf(x) - expect * (-x * x).exp()).abs() < 1e-9);
        }
        assert!((d.cdf(f64::INFINITY).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_is_rejected() {
        assert!(matches!(ray_stationary_density(1.0, 2f64.sqrt()), Err(Error::NoStationaryDensity { .. })));
    }

    #[test]
    fn near_threshold_diverges_at_origin() {
        let d = ray_stationary_density(1.0, 2f64.sqrt() - 1e-3).unwrap();
        assert!(d.exponent > -1.0 && d.exponent < -0.99);
        assert!(d.pdf(1e-8) > d.pdf(1e-4));
        assert!((d.cdf(1e6).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn weak_noise_does_not_underflow() {
        let d = ray_stationary_density(3.0, 0.05).unwrap();
        assert!(d.pdf(1.0).is_finite() && d.pdf(1.0) > 1.0);
        assert!((d.cdf(1.0).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn ks_of_quantiles_is_small() {
        let d = ray_stationary_density(1.0, 1.0).unwrap();
        // Midpoint quantiles of the half-Gaussian via bisection on the CDF.
        let n = 200;
        let qs: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (0.0, 6.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if d.cdf(mid).unwrap() < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let ks = d.ks_distance(&qs).unwrap();
        assert!((ks - 0.5 / n as f64).abs() < 1e-6, "ks {ks}");
    }
}
