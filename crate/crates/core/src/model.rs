//! General cubic Kolmogorov fields and the six-parameter canonical system
//! with an invariant unit sphere.

use std::fmt;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly::{rat, CompiledPoly, Monomial, SparsePoly};

/// Upper-triangular index pairs for the quadratic coefficients, in the order
/// `11, 12, 13, 22, 23, 33`.
pub const QUAD_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn quad_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    QUAD_PAIRS.iter().position(|&p| p == (i, j)).unwrap()
}

/// An exact rational read from JSON either as a number (taken at its
/// shortest decimal spelling) or as a string `"p/q"` / `"0.125"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar(pub BigRational);

impl Scalar {
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Invalid(format!("non-finite parameter {x}")));
        }
        parse_rational(&format!("{x:?}")).map(Scalar)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

/// Parses `"p/q"`, integers, and decimal literals (with optional exponent).
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("not a rational number: `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: num_bigint::BigInt = format!("{int_part}{frac}0").parse().map_err(|_| bad())?;
    let ten = num_bigint::BigInt::from(10);
    let scale = exp - frac.len() as i32 - 1;
    let mut v = BigRational::from_integer(digits);
    if scale >= 0 {
        v *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        v /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -v } else { v })
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Scalar::from_f64(x).map_err(serde::de::Error::custom),
            Raw::Text(s) => parse_rational(&s).map(Scalar).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.0.to_string())
    }
}

fn scalars<const N: usize>(v: &[BigRational; N]) -> [Scalar; N] {
    v.clone().map(Scalar)
}

fn rationals<const N: usize>(v: [Scalar; N]) -> [BigRational; N] {
    v.map(|s| s.0)
}

/// Coefficients of the general cubic Kolmogorov system
/// `x_i' = x_i (r_i + linear_i . x + quadratic_i . (x_p x_q))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralCubicCoeffs {
    pub r: [BigRational; 3],
    pub a: [BigRational; 3],
    pub b: [BigRational; 3],
    pub c: [BigRational; 3],
    /// Quadratic coefficients in [`QUAD_PAIRS`] order.
    pub a_ij: [BigRational; 6],
    pub b_ij: [BigRational; 6],
    pub c_ij: [BigRational; 6],
}

impl Default for GeneralCubicCoeffs {
    fn default() -> Self {
        let z3 = || std::array::from_fn(|_| BigRational::zero());
        let z6 = || std::array::from_fn(|_| BigRational::zero());
        GeneralCubicCoeffs { r: z3(), a: z3(), b: z3(), c: z3(), a_ij: z6(), b_ij: z6(), c_ij: z6() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffsJson {
    #[serde(default = "zeros")]
    r: [Scalar; 3],
    #[serde(default = "zeros")]
    a: [Scalar; 3],
    #[serde(default = "zeros")]
    b: [Scalar; 3],
    #[serde(default = "zeros")]
    c: [Scalar; 3],
    #[serde(default = "zeros")]
    a_ij: [Scalar; 6],
    #[serde(default = "zeros")]
    b_ij: [Scalar; 6],
    #[serde(default = "zeros")]
    c_ij: [Scalar; 6],
}

fn zeros<const N: usize>() -> [Scalar; N] {
    std::array::from_fn(|_| Scalar(BigRational::zero()))
}

impl Serialize for GeneralCubicCoeffs {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        CoeffsJson {
            r: scalars(&self.r),
            a: scalars(&self.a),
            b: scalars(&self.b),
            c: scalars(&self.c),
            a_ij: scalars(&self.a_ij),
            b_ij: scalars(&self.b_ij),
            c_ij: scalars(&self.c_ij),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GeneralCubicCoeffs {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = CoeffsJson::deserialize(de)?;
        Ok(GeneralCubicCoeffs {
            r: rationals(j.r),
            a: rationals(j.a),
            b: rationals(j.b),
            c: rationals(j.c),
            a_ij: rationals(j.a_ij),
            b_ij: rationals(j.b_ij),
            c_ij: rationals(j.c_ij),
        })
    }
}

impl GeneralCubicCoeffs {
    fn linear(&self, i: usize) -> &[BigRational; 3] {
        [&self.a, &self.b, &self.c][i]
    }

    fn quadratic(&self, i: usize) -> &[BigRational; 6] {
        [&self.a_ij, &self.b_ij, &self.c_ij][i]
    }

    /// Mutable access to every coefficient, in a fixed order, with its name.
    pub fn entries_mut(&mut self) -> Vec<(String, &mut BigRational)> {
        let mut out = Vec::with_capacity(30);
        for (k, v) in self.r.iter_mut().enumerate() {
            out.push((format!("r_{}", k + 1), v));
        }
        for (name, arr) in [("a", &mut self.a), ("b", &mut self.b), ("c", &mut self.c)] {
            for (k, v) in arr.iter_mut().enumerate() {
                out.push((format!("{name}_{}", k + 1), v));
            }
        }
        for (name, arr) in [("a", &mut self.a_ij), ("b", &mut self.b_ij), ("c", &mut self.c_ij)] {
            for (k, v) in arr.iter_mut().enumerate() {
                let (p, q) = QUAD_PAIRS[k];
                out.push((format!("{name}_{}{}", p + 1, q + 1), v));
            }
        }
        out
    }

    pub fn has_quadratic_terms(&self) -> bool {
        self.a_ij.iter().chain(&self.b_ij).chain(&self.c_ij).any(|v| !v.is_zero())
    }
}

/// The canonical parameters `(alpha, d)` in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: [f64; 3],
    pub d: [f64; 3],
}

/// The canonical parameters as exact rationals, used for certification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactParams {
    pub alpha: [BigRational; 3],
    pub d: [BigRational; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactParamsJson {
    alpha: [Scalar; 3],
    d: [Scalar; 3],
}

impl Serialize for ExactParams {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ExactParamsJson { alpha: scalars(&self.alpha), d: scalars(&self.d) }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ExactParams {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = ExactParamsJson::deserialize(de)?;
        Ok(ExactParams { alpha: rationals(j.alpha), d: rationals(j.d) })
    }
}

impl ExactParams {
    pub fn to_f64(&self) -> ModelParams {
        let f = |v: &BigRational| v.to_f64().unwrap_or(f64::NAN);
        ModelParams { alpha: self.alpha.each_ref().map(f), d: self.d.each_ref().map(f) }
    }
}

impl ModelParams {
    pub fn new(alpha: [f64; 3], d: [f64; 3]) -> Self {
        ModelParams { alpha, d }
    }

    /// Rational form, taking each float at its shortest decimal spelling.
    pub fn to_exact(&self) -> Result<ExactParams> {
        let conv = |x: f64| Scalar::from_f64(x).map(|s| s.0);
        Ok(ExactParams {
            alpha: [conv(self.alpha[0])?, conv(self.alpha[1])?, conv(self.alpha[2])?],
            d: [conv(self.d[0])?, conv(self.d[1])?, conv(self.d[2])?],
        })
    }

    /// `[alpha1 + d2, alpha2 + d1, alpha3 + d3]`, whose signs decide the
    /// equilibrium structure on the sphere.
    pub fn cross_rates(&self) -> [f64; 3] {
        let (a, d) = (self.alpha, self.d);
        [a[0] + d[1], a[1] + d[0], a[2] + d[2]]
    }

    /// Cubic coefficient matrix `b` with `x_i' = x_i (alpha_i + sum_j b_ij x_j^2)`.
    pub fn interaction_matrix(&self) -> [[f64; 3]; 3] {
        let (a, d) = (self.alpha, self.d);
        [
            [-a[0], -(a[0] + a[1] + d[0]), d[1]],
            [d[0], -a[1], -(a[1] + a[2] + d[2])],
            [-(a[2] + a[0] + d[1]), d[2], -a[2]],
        ]
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_alpha_positive(&self) -> bool {
        self.alpha.iter().all(|&a| a > 0.0)
    }

    /// Drift of the canonical system at `x`.
    #[inline]
    pub fn drift(&self, x: [f64; 3]) -> [f64; 3] {
        let b = self.interaction_matrix();
        let sq = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
        std::array::from_fn(|i| x[i] * (self.alpha[i] + b[i][0] * sq[0] + b[i][1] * sq[1] + b[i][2] * sq[2]))
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={:?} d={:?}", self.alpha, self.d)
    }
}

/// Polynomial vector field in Kolmogorov form, each component divisible by
/// its own coordinate and of degree at most three.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubicField {
    components: [SparsePoly; 3],
}

impl CubicField {
    pub fn try_new(components: [SparsePoly; 3]) -> Result<Self> {
        check_kolmogorov(&components)?;
        if let Some(i) = components.iter().position(|p| p.degree() > 3) {
            return Err(Error::Invalid(format!("component {} has degree {} > 3", i + 1, components[i].degree())));
        }
        Ok(CubicField { components })
    }

    pub fn zero() -> Self {
        CubicField { components: Default::default() }
    }

    pub fn components(&self) -> &[SparsePoly; 3] {
        &self.components
    }

    pub fn compile(&self) -> CompiledField {
        let comps = self.components.each_ref().map(SparsePoly::compile);
        let jac = std::array::from_fn(|i| std::array::from_fn(|j| self.components[i].partial(j).compile()));
        CompiledField { components: comps, jacobian: jac }
    }
}

/// Each component must vanish on its own coordinate plane.
pub fn check_kolmogorov(components: &[SparsePoly; 3]) -> Result<()> {
    for (i, p) in components.iter().enumerate() {
        if let Some((m, _)) = p.terms().find(|(m, _)| m.0[i] == 0) {
            return Err(Error::Invalid(format!(
                "component {} is not divisible by x{} (term with exponents {:?})",
                i + 1,
                i + 1,
                m.0
            )));
        }
    }
    Ok(())
}

/// Floating-point copy of a [`CubicField`] together with its symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct CompiledField {
    components: [CompiledPoly; 3],
    jacobian: [[CompiledPoly; 3]; 3],
}

impl CompiledField {
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        self.components.each_ref().map(|p| p.eval(x))
    }

    pub fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        self.jacobian.each_ref().map(|row| row.each_ref().map(|p| p.eval(x)))
    }
}

/// Assemble `x_i (r_i + sum_j lin_ij x_j + sum_{p<=q} quad_ipq x_p x_q)`.
pub fn build_general(coeffs: &GeneralCubicCoeffs) -> CubicField {
    let components = std::array::from_fn(|i| {
        let mut g = SparsePoly::constant(coeffs.r[i].clone());
        for (j, c) in coeffs.linear(i).iter().enumerate() {
            g = &g + &SparsePoly::term(c.clone(), Monomial::var(j));
        }
        for (k, c) in coeffs.quadratic(i).iter().enumerate() {
            let (p, q) = QUAD_PAIRS[k];
            let m = Monomial::var(p);
            let mut e = m.0;
            e[q] += 1;
            g = &g + &SparsePoly::term(c.clone(), Monomial(e));
        }
        &SparsePoly::var(i) * &g
    });
    CubicField { components }
}

/// General-system coefficients of the canonical six-parameter field.
pub fn canonical_coeffs(params: &ExactParams) -> GeneralCubicCoeffs {
    let [a1, a2, a3] = params.alpha.clone();
    let [d1, d2, d3] = params.d.clone();
    let mut c = GeneralCubicCoeffs { r: params.alpha.clone(), ..Default::default() };
    c.a_ij[quad_index(0, 0)] = -a1.clone();
    c.a_ij[quad_index(1, 1)] = -(&a1 + &a2 + &d1);
    c.a_ij[quad_index(2, 2)] = d2.clone();
    c.b_ij[quad_index(0, 0)] = d1;
    c.b_ij[quad_index(1, 1)] = -a2.clone();
    c.b_ij[quad_index(2, 2)] = -(&a2 + &a3 + &d3);
    c.c_ij[quad_index(0, 0)] = -(&a3 + &a1 + &d2);
    c.c_ij[quad_index(1, 1)] = d3;
    c.c_ij[quad_index(2, 2)] = -a3;
    c
}

pub fn canonical_field(params: &ExactParams) -> CubicField {
    build_general(&canonical_coeffs(params))
}

/// `(S1, S2)` with `S1 = a1(a3+d3) + a2(a1+d2) + a3(a2+d1)` and
/// `S2 = sum_i (a_i + d_i)`.
pub fn det_quantities(params: &ModelParams) -> (f64, f64) {
    let a = params.alpha;
    let [p, q, r] = params.cross_rates();
    let s1 = a[0] * r + a[1] * p + a[2] * q;
    let s2 = p + q + r;
    (s1, s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphereStatus {
    NotInvariant,
    InvariantIsolated,
    InvariantFirstIntegral,
}

impl SphereStatus {
    pub fn is_invariant(self) -> bool {
        !matches!(self, SphereStatus::NotInvariant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereCertificate {
    pub status: SphereStatus,
    /// Present iff the sphere is invariant.
    pub cofactor: Option<SparsePoly>,
    /// Failed equalities, empty iff the sphere is invariant.
    pub violations: Vec<String>,
}

/// Check the closed-form coefficient conditions for the unit sphere to be
/// invariant and return the certificate with cofactor `-2 sum r_i x_i^2`.
pub fn check_sphere_conditions(coeffs: &GeneralCubicCoeffs) -> SphereCertificate {
    let mut violations = Vec::new();
    let mut require_zero = |name: String, v: &BigRational| {
        if !v.is_zero() {
            violations.push(format!("{name} = 0"));
        }
    };
    for (name, arr) in [("a", &coeffs.a), ("b", &coeffs.b), ("c", &coeffs.c)] {
        for (k, v) in arr.iter().enumerate() {
            require_zero(format!("{name}_{}", k + 1), v);
        }
    }
    for (name, arr) in [("a", &coeffs.a_ij), ("b", &coeffs.b_ij), ("c", &coeffs.c_ij)] {
        for (k, v) in arr.iter().enumerate() {
            let (p, q) = QUAD_PAIRS[k];
            if p != q {
                require_zero(format!("{name}_{}{}", p + 1, q + 1), v);
            }
        }
    }

    let r = &coeffs.r;
    let diag = |arr: &[BigRational; 6], i: usize| arr[quad_index(i, i)].clone();
    let (a11, a22, a33) = (diag(&coeffs.a_ij, 0), diag(&coeffs.a_ij, 1), diag(&coeffs.a_ij, 2));
    let (b11, b22) = (diag(&coeffs.b_ij, 0), diag(&coeffs.b_ij, 1));
    let b33 = diag(&coeffs.b_ij, 2);
    let (c11, c22, c33) = (diag(&coeffs.c_ij, 0), diag(&coeffs.c_ij, 1), diag(&coeffs.c_ij, 2));
    let equalities: [(&str, BigRational, BigRational); 6] = [
        ("a_11 = -r_1", a11, -r[0].clone()),
        ("a_22 = -(r_1+r_2+b_11)", a22, -(&r[0] + &r[1] + &b11)),
        ("b_22 = -r_2", b22, -r[1].clone()),
        ("b_33 = -(r_2+r_3+c_22)", b33, -(&r[1] + &r[2] + &c22)),
        ("c_11 = -(r_1+r_3+a_33)", c11, -(&r[0] + &r[2] + &a33)),
        ("c_33 = -r_3", c33, -r[2].clone()),
    ];
    for (name, lhs, rhs) in equalities {
        if lhs != rhs {
            violations.push(name.to_string());
        }
    }

    if !violations.is_empty() {
        return SphereCertificate { status: SphereStatus::NotInvariant, cofactor: None, violations };
    }
    let cofactor = SparsePoly::from_terms((0..3).map(|i| (Monomial(sq_exp(i)), r[i].clone() * rat(-2))));
    let status =
        if cofactor.is_zero() { SphereStatus::InvariantFirstIntegral } else { SphereStatus::InvariantIsolated };
    SphereCertificate { status, cofactor: Some(cofactor), violations }
}

fn sq_exp(i: usize) -> [u32; 3] {
    let mut e = [0; 3];
    e[i] = 2;
    e
}

/// Divide `sum_i dF/dx_i * P_i` by `F = |x|^2 - 1`; returns `(cofactor, remainder)`.
///
/// Works for polynomial components of any degree.
pub fn darboux_residual_of(components: &[SparsePoly; 3]) -> (SparsePoly, SparsePoly) {
    let f = SparsePoly::unit_sphere();
    let mut p = SparsePoly::zero();
    for (i, comp) in components.iter().enumerate() {
        p = &p + &(&f.partial(i) * comp);
    }
    p.divide(&f).expect("unit sphere is nonzero")
}

pub fn darboux_residual(field: &CubicField) -> (SparsePoly, SparsePoly) {
    darboux_residual_of(field.components())
}

/// Status implied by a Darboux residual.
pub fn status_from_residual(cofactor: &SparsePoly, remainder: &SparsePoly) -> SphereStatus {
    if !remainder.is_zero() {
        SphereStatus::NotInvariant
    } else if cofactor.is_zero() {
        SphereStatus::InvariantFirstIntegral
    } else {
        SphereStatus::InvariantIsolated
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeBoundReport {
    pub status: SphereStatus,
    pub cofactor: SparsePoly,
    pub remainder: SparsePoly,
}

impl DegreeBoundReport {
    /// A quadratic Kolmogorov field can never carry an isolated invariant sphere.
    pub fn respects_bound(&self) -> bool {
        self.status != SphereStatus::InvariantIsolated
    }
}

/// Run the Darboux pipeline on a field of degree at most two.
pub fn degree_bound_witness(coeffs: &GeneralCubicCoeffs) -> Result<DegreeBoundReport> {
    if coeffs.has_quadratic_terms() {
        return Err(Error::Invalid(
            "degree bound witness needs a field of degree <= 2 (quadratic coefficients must vanish)".into(),
        ));
    }
    let (cofactor, remainder) = darboux_residual(&build_general(coeffs));
    let status = status_from_residual(&cofactor, &remainder);
    Ok(DegreeBoundReport { status, cofactor, remainder })
}
