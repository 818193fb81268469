//! Exact sparse polynomials in three variables over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded lexicographic with `x1 > x2 > x3`. The last entry of the map is
//! therefore always the leading term, which is what [`SparsePoly::divide`]
//! relies on.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

mod parse;

pub use parse::parse_poly;

/// Exponent triple `x1^e1 * x2^e2 * x3^e3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub [u32; 3]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0, 0, 0]);

    pub fn new(e1: u32, e2: u32, e3: u32) -> Self {
        Monomial([e1, e2, e3])
    }

    /// The monomial `x_var` for `var` in `0..3`.
    pub fn var(var: usize) -> Self {
        let mut e = [0; 3];
        e[var] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming `self.divides(other)`.
    fn quotient_of(&self, other: &Monomial) -> Monomial {
        Monomial([other.0[0] - self.0[0], other.0[1] - self.0[1], other.0[2] - self.0[2]])
    }

    fn times(&self, other: &Monomial) -> Monomial {
        Monomial([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact polynomial in `x1, x2, x3` with rational coefficients.
///
/// No stored coefficient is ever zero; the zero polynomial has no terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparsePoly {
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl SparsePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(c, Monomial::ONE)
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// The variable `x_{var+1}`.
    pub fn var(var: usize) -> Self {
        Self::term(BigRational::one(), Monomial::var(var))
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, BigRational)>,
    {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// `x1^2 + x2^2 + x3^2 - 1`.
    pub fn unit_sphere() -> Self {
        Self::from_terms([
            (Monomial::new(2, 0, 0), rat(1)),
            (Monomial::new(0, 2, 0), rat(1)),
            (Monomial::new(0, 0, 2), rat(1)),
            (Monomial::ONE, rat(-1)),
        ])
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let remove = {
            let slot = self.terms.entry(m).or_insert_with(BigRational::zero);
            *slot += c;
            slot.is_zero()
        };
        if remove {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, `-1` for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.terms.keys().next_back().map_or(-1, |m| i64::from(m.degree()))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        SparsePoly { terms: self.terms.iter().map(|(m, v)| (*m, v * c)).collect() }
    }

    fn mul_term(&self, m: &Monomial, c: &BigRational) -> Self {
        SparsePoly { terms: self.terms.iter().map(|(k, v)| (k.times(m), v * c)).collect() }
    }

    /// Formal partial derivative with respect to `x_{var+1}`.
    pub fn partial(&self, var: usize) -> Self {
        assert!(var < 3, "variable index out of range");
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut dm = *m;
            dm.0[var] -= 1;
            out.add_term(dm, c * rat(i64::from(e)));
        }
        out
    }

    /// Divide by `d`, returning `(quotient, remainder)` with
    /// `self = quotient * d + remainder` and no remainder term divisible by
    /// the graded-lex leading term of `d`.
    pub fn divide(&self, d: &SparsePoly) -> Result<(SparsePoly, SparsePoly)> {
        let (lm, lc) = match d.leading_term() {
            Some((m, c)) => (*m, c.clone()),
            None => return Err(Error::DivisionByZero),
        };
        let mut p = self.clone();
        let mut quotient = SparsePoly::zero();
        let mut remainder = SparsePoly::zero();
        while let Some((pm, pc)) = p.leading_term().map(|(m, c)| (*m, c.clone())) {
            if lm.divides(&pm) {
                let qm = lm.quotient_of(&pm);
                let qc = &pc / &lc;
                p = &p - &d.mul_term(&qm, &qc);
                quotient.add_term(qm, qc);
            } else {
                p.terms.remove(&pm);
                remainder.add_term(pm, pc);
            }
        }
        Ok((quotient, remainder))
    }

    /// Floating-point evaluation as a plain monomial sum.
    pub fn evaluate(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                c.to_f64().unwrap_or(f64::NAN)
                    * x[0].powi(m.0[0] as i32)
                    * x[1].powi(m.0[1] as i32)
                    * x[2].powi(m.0[2] as i32)
            })
            .sum()
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate_exact(&self, x: &[BigRational; 3]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(m.0.iter()) {
                t *= num_traits::pow(xi.clone(), e as usize);
            }
            acc += t;
        }
        acc
    }

    /// Floating-point copy used on the simulation path.
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (c.to_f64().unwrap_or(f64::NAN), [m.0[0] as i32, m.0[1] as i32, m.0[2] as i32]))
                .collect(),
        }
    }
}

/// Monomial-sum evaluator with `f64` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, [i32; 3])>,
}

impl CompiledPoly {
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms.iter().map(|(c, e)| c * x[0].powi(e[0]) * x[1].powi(e[1]) * x[2].powi(e[2])).sum()
    }
}

impl Add for &SparsePoly {
    type Output = SparsePoly;
    fn add(self, rhs: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl Sub for &SparsePoly {
    type Output = SparsePoly;
    fn sub(self, rhs: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, -c.clone());
        }
        out
    }
}

impl Mul for &SparsePoly {
    type Output = SparsePoly;
    fn mul(self, rhs: &SparsePoly) -> SparsePoly {
        let mut out = SparsePoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.times(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &SparsePoly {
    type Output = SparsePoly;
    fn neg(self) -> SparsePoly {
        SparsePoly { terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect() }
    }
}

macro_rules! forward_owned {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr for SparsePoly {
            type Output = SparsePoly;
            fn $f(self, rhs: SparsePoly) -> SparsePoly {
                (&self).$f(&rhs)
            }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for SparsePoly {
    type Output = SparsePoly;
    fn neg(self) -> SparsePoly {
        -&self
    }
}

/// Canonical text form: terms in descending graded-lex order, each written
/// as `c*x1^a*x2^b*x3^c` with unit exponents still spelled out and absent
/// variables omitted. The zero polynomial renders as `0`.
impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            if c.is_negative() {
                write!(f, "-")?;
            } else if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "{}", c.abs())?;
            for (v, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    write!(f, "*x{}^{}", v + 1, e)?;
                }
            }
        }
        Ok(())
    }
}
