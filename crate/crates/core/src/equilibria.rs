//! Equilibria of the canonical system in the closed positive octant, their
//! spectra, and the deterministic regime classification.

use std::fmt;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{det_quantities, CompiledField, ModelParams};
use crate::ode::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    O,
    E1,
    E2,
    E3,
    QStar,
}

impl EquilibriumLabel {
    pub fn boundary(i: usize) -> Self {
        [EquilibriumLabel::E1, EquilibriumLabel::E2, EquilibriumLabel::E3][i]
    }
}

impl fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EquilibriumLabel::O => "O",
            EquilibriumLabel::E1 => "e1",
            EquilibriumLabel::E2 => "e2",
            EquilibriumLabel::E3 => "e3",
            EquilibriumLabel::QStar => "Qstar",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub position: State,
    pub eigenvalues: [Complex64; 3],
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn require_isolated(params: &ModelParams) -> Result<[f64; 3]> {
    let q = params.cross_rates();
    if q.contains(&0.0) {
        return Err(Error::NonIsolated(format!("(alpha1+d2, alpha2+d1, alpha3+d3) = {q:?} has a zero entry")));
    }
    Ok(q)
}

fn same_sign(q: [f64; 3]) -> bool {
    let s = sign(q[0]);
    s != 0 && sign(q[1]) == s && sign(q[2]) == s
}

/// Positive equilibrium on the sphere; present iff the three cross rates
/// share a strict sign.
pub fn qstar_position(params: &ModelParams) -> Option<State> {
    let q = params.cross_rates();
    if !same_sign(q) {
        return None;
    }
    let (_, s2) = det_quantities(params);
    Some([(q[2] / s2).sqrt(), (q[0] / s2).sqrt(), (q[1] / s2).sqrt()])
}

pub fn enumerate_equilibria(params: &ModelParams) -> Result<Vec<Equilibrium>> {
    require_isolated(params)?;
    let mut out = vec![Equilibrium {
        label: EquilibriumLabel::O,
        position: [0.0; 3],
        eigenvalues: eigenvalues_closed_form(params, EquilibriumLabel::O)?,
    }];
    for i in 0..3 {
        let mut pos = [0.0; 3];
        pos[i] = 1.0;
        let label = EquilibriumLabel::boundary(i);
        out.push(Equilibrium { label, position: pos, eigenvalues: eigenvalues_closed_form(params, label)? });
    }
    if let Some(pos) = qstar_position(params) {
        out.push(Equilibrium {
            label: EquilibriumLabel::QStar,
            position: pos,
            eigenvalues: eigenvalues_closed_form(params, EquilibriumLabel::QStar)?,
        });
    }
    Ok(out)
}

pub fn eigenvalues_closed_form(params: &ModelParams, label: EquilibriumLabel) -> Result<[Complex64; 3]> {
    let a = params.alpha;
    let [p, q, r] = params.cross_rates();
    let re = |v: f64| Complex64::new(v, 0.0);
    Ok(match label {
        EquilibriumLabel::O => [re(a[0]), re(a[1]), re(a[2])],
        EquilibriumLabel::E1 => [re(-2.0 * a[0]), re(q), re(-p)],
        EquilibriumLabel::E2 => [re(-q), re(-2.0 * a[1]), re(r)],
        EquilibriumLabel::E3 => [re(p), re(-r), re(-2.0 * a[2])],
        EquilibriumLabel::QStar => {
            if !same_sign([p, q, r]) {
                return Err(Error::Invalid(
                    "Qstar requested but no positive equilibrium exists for these parameters".into(),
                ));
            }
            let (s1, s2) = det_quantities(params);
            let lambda = 2.0 * (q * p * r / s2).sqrt();
            [Complex64::new(0.0, lambda), Complex64::new(0.0, -lambda), re(-2.0 * s1 / s2)]
        }
    })
}

/// Jacobian from the symbolic partial derivatives of `field`, evaluated at `x`.
pub fn numerical_jacobian(field: &CompiledField, x: State) -> [[f64; 3]; 3] {
    field.jacobian(x)
}

pub fn matrix_eigenvalues(m: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let mat = Matrix3::from_fn(|i, j| m[i][j]);
    let ev = mat.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

/// Largest distance between each expected eigenvalue and its nearest
/// unclaimed partner in `actual`.
pub fn eigenvalue_mismatch(expected: &[Complex64; 3], actual: &[Complex64; 3]) -> f64 {
    let mut used = [false; 3];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (k, d) = actual
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, a)| (k, (a - e).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("three eigenvalues");
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index")]
pub enum DetRegimeKind {
    CenterOnSphere,
    /// Zero-based index of the attracting boundary equilibrium.
    BoundaryAttractor(usize),
    NotCovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetRegime {
    pub kind: DetRegimeKind,
    /// Signs of `(alpha1+d2, alpha2+d1, alpha3+d3)`.
    pub signs: [i8; 3],
}

impl fmt::Display for DetRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DetRegimeKind::CenterOnSphere => write!(f, "CenterOnSphere"),
            DetRegimeKind::BoundaryAttractor(i) => write!(f, "BoundaryAttractor(e{})", i + 1),
            DetRegimeKind::NotCovered => write!(f, "NotCovered"),
        }
    }
}

/// Deterministic global regime. Non-positive growth rates fall outside the
/// classification and yield `NotCovered`; a zero cross rate is an error.
pub fn classify_regime_det(params: &ModelParams) -> Result<DetRegime> {
    let q = require_isolated(params)?;
    let signs = q.map(sign);
    if !params.all_alpha_positive() {
        return Ok(DetRegime { kind: DetRegimeKind::NotCovered, signs });
    }
    if same_sign(q) {
        return Ok(DetRegime { kind: DetRegimeKind::CenterOnSphere, signs });
    }
    let stable: Vec<usize> = (0..3)
        .filter(|&i| {
            eigenvalues_closed_form(params, EquilibriumLabel::boundary(i))
                .map(|ev| ev.iter().all(|z| z.re < 0.0))
                .unwrap_or(false)
        })
        .collect();
    match stable.as_slice() {
        [i] => Ok(DetRegime { kind: DetRegimeKind::BoundaryAttractor(*i), signs }),
        _ => Err(Error::Invalid(format!("expected exactly one stable boundary equilibrium, found {stable:?}"))),
    }
}

/// `log|H|` on the sphere chart `(x1, x2)` with the factor
/// `x1^2 + x2^2 - 1` replaced by `1 - x1^2 - x2^2`. NaN outside the chart.
pub fn log_first_integral_unchecked(params: &ModelParams, chart: [f64; 2]) -> f64 {
    let [p, q, r] = params.cross_rates();
    let (x1, x2) = (chart[0], chart[1]);
    let w = 1.0 - x1 * x1 - x2 * x2;
    if x1 <= 0.0 || x2 <= 0.0 || w <= 0.0 {
        return f64::NAN;
    }
    2.0 * r * x1.ln() + 2.0 * p * x2.ln() + q * w.ln()
}

/// Log-form first integral of the on-sphere dynamics in the center regime.
pub fn first_integral_h(params: &ModelParams, chart: [f64; 2]) -> Result<f64> {
    let regime = classify_regime_det(params)?;
    if regime.kind != DetRegimeKind::CenterOnSphere {
        return Err(Error::Hypothesis(format!("first integral needs the center regime, got {regime}")));
    }
    let (x1, x2) = (chart[0], chart[1]);
    if x1 <= 0.0 || x2 <= 0.0 || x1 * x1 + x2 * x2 >= 1.0 {
        return Err(Error::DegenerateFirstIntegral);
    }
    Ok(log_first_integral_unchecked(params, chart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonical_field;

    fn p(alpha: [f64; 3], d: [f64; 3]) -> ModelParams {
        ModelParams::new(alpha, d)
    }

    #[test]
    fn five_equilibria_in_center_case() {
        let params = p([1.0; 3], [0.0; 3]);
        let eq = enumerate_equilibria(&params).unwrap();
        assert_eq!(eq.len(), 5);
        let q = eq[4].position;
        let s = 1.0 / 3f64.sqrt();
        for v in q {
            assert!((v - s).abs() < 1e-15);
        }
        let f = params.drift(q);
        assert!(f.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn four_equilibria_with_cross_sign() {
        let eq = enumerate_equilibria(&p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0])).unwrap();
        assert_eq!(eq.len(), 4);
        assert!(eq.iter().all(|e| e.label != EquilibriumLabel::QStar));
    }

    #[test]
    fn zero_cross_rate_is_rejected() {
        let err = enumerate_equilibria(&p([1.0; 3], [-1.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonIsolated(_)));
        assert!(classify_regime_det(&p([1.0; 3], [-1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn closed_form_eigenvalues_at_each_equilibrium() {
        let params = p([1.0, 2.0, 3.0], [0.0; 3]);
        let o = eigenvalues_closed_form(&params, EquilibriumLabel::O).unwrap();
        assert_eq!(o.map(|z| z.re), [1.0, 2.0, 3.0]);
        let e1 = eigenvalues_closed_form(&params, EquilibriumLabel::E1).unwrap();
        assert_eq!(e1.map(|z| z.re), [-2.0, 2.0, -1.0]);

        let q = eigenvalues_closed_form(&p([1.0; 3], [0.0; 3]), EquilibriumLabel::QStar).unwrap();
        let lam = 2.0 / 3f64.sqrt();
        assert!((q[0] - Complex64::new(0.0, lam)).norm() < 1e-15);
        assert!((q[1] - Complex64::new(0.0, -lam)).norm() < 1e-15);
        assert!((q[2] - Complex64::new(-2.0, 0.0)).norm() < 1e-15);

        let none = eigenvalues_closed_form(&p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0]), EquilibriumLabel::QStar);
        assert!(none.is_err());
    }

    #[test]
    fn jacobian_at_origin_and_e1() {
        let params = p([1.0; 3], [0.0; 3]);
        let f = canonical_field(&params.to_exact().unwrap()).compile();
        let j = numerical_jacobian(&f, [0.0; 3]);
        assert_eq!(j, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

        let params = p([1.0, 2.0, 3.0], [0.0; 3]);
        let f = canonical_field(&params.to_exact().unwrap()).compile();
        let ev = matrix_eigenvalues(&numerical_jacobian(&f, [1.0, 0.0, 0.0]));
        let expected = eigenvalues_closed_form(&params, EquilibriumLabel::E1).unwrap();
        assert!(eigenvalue_mismatch(&expected, &ev) < 1e-12);
    }

    #[test]
    fn qstar_numerical_spectrum() {
        let params = p([1.0; 3], [0.0; 3]);
        let f = canonical_field(&params.to_exact().unwrap()).compile();
        let q = qstar_position(&params).unwrap();
        let ev = matrix_eigenvalues(&numerical_jacobian(&f, q));
        let expected = eigenvalues_closed_form(&params, EquilibriumLabel::QStar).unwrap();
        assert!(eigenvalue_mismatch(&expected, &ev) < 1e-8);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let params = p([0.8, 1.7, 2.2], [0.3, -1.1, 0.6]);
        let f = canonical_field(&params.to_exact().unwrap()).compile();
        let h = 1e-5;
        for x in [[0.3, -0.4, 0.9], [1.2, 0.1, -0.7], [0.0, 2.0, 0.5]] {
            let j = numerical_jacobian(&f, x);
            for col in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[col] += h;
                xm[col] -= h;
                let (fp, fm) = (params.drift(xp), params.drift(xm));
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((fd - j[row][col]).abs() < 1e-6, "{row},{col}: {fd} vs {}", j[row][col]);
                }
            }
        }
    }

    #[test]
    fn regime_examples() {
        let r = classify_regime_det(&p([1.0; 3], [0.0; 3])).unwrap();
        assert_eq!(r.kind, DetRegimeKind::CenterOnSphere);
        assert_eq!(r.signs, [1, 1, 1]);

        let r = classify_regime_det(&p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0])).unwrap();
        assert_eq!(r.kind, DetRegimeKind::BoundaryAttractor(1));
        let e2 = eigenvalues_closed_form(&p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0]), EquilibriumLabel::E2).unwrap();
        assert_eq!(e2.map(|z| z.re), [-2.0, -4.0, -1.0]);

        let r = classify_regime_det(&p([7.5; 3], [0.0; 3])).unwrap();
        assert_eq!(r.kind, DetRegimeKind::CenterOnSphere);

        let r = classify_regime_det(&p([-1.0, 1.0, 1.0], [0.0, 2.0, 0.0])).unwrap();
        assert_eq!(r.kind, DetRegimeKind::NotCovered);
    }

    #[test]
    fn first_integral_examples() {
        let params = p([1.0; 3], [0.0; 3]);
        let h = first_integral_h(&params, [0.5, 0.5]).unwrap();
        assert!((h - 5.0 * 0.5f64.ln()).abs() < 1e-14);

        assert!(matches!(first_integral_h(&params, [0.0, 0.5]), Err(Error::DegenerateFirstIntegral)));
        assert!(matches!(first_integral_h(&params, [0.8, 0.6]), Err(Error::DegenerateFirstIntegral)));
        assert!(first_integral_h(&p([1.0, 2.0, 3.0], [0.0, -3.0, -4.0]), [0.5, 0.5]).is_err());
    }

    #[test]
    fn qstar_is_critical_point_of_h() {
        let params = p([0.9, 1.4, 2.3], [0.2, -0.5, 0.1]);
        let q = qstar_position(&params).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut plus = [q[0], q[1]];
            let mut minus = plus;
            plus[k] += h;
            minus[k] -= h;
            let g = (first_integral_h(&params, plus).unwrap() - first_integral_h(&params, minus).unwrap()) / (2.0 * h);
            assert!(g.abs() < 1e-8, "gradient component {k} = {g}");
        }
    }
}
