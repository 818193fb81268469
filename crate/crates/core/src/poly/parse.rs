use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Monomial, SparsePoly};
use crate::error::{Error, Result};

/// Parse the text form produced by `Display for SparsePoly`.
///
/// Also accepts the looser spellings people type by hand: whitespace,
/// implicit unit coefficients (`x1^2`), implicit unit exponents (`x1`),
/// decimal coefficients (`0.25*x2`) and repeated factors (`x1*x1`).
pub fn parse_poly(text: &str) -> Result<SparsePoly> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut parser = Parser { chars, pos: 0, src: text };
    parser.poly()
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn poly(&mut self) -> Result<SparsePoly> {
        if self.chars.is_empty() {
            return Err(self.err("empty polynomial"));
        }
        let mut out = SparsePoly::zero();
        let mut first = true;
        while self.pos < self.chars.len() {
            let negative = match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    false
                }
                Some('-') => {
                    self.pos += 1;
                    true
                }
                _ if first => false,
                _ => return Err(self.err("expected `+` or `-`")),
            };
            first = false;
            let (m, mut c) = self.term()?;
            if negative {
                c = -c;
            }
            out.add_term(m, c);
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(Monomial, BigRational)> {
        let mut coeff = BigRational::one();
        let mut mono = Monomial::ONE;
        loop {
            match self.peek() {
                Some('x') => {
                    self.pos += 1;
                    let var = match self.peek() {
                        Some(c @ '1'..='3') => c as usize - '1' as usize,
                        _ => return Err(self.err("expected variable index 1..3")),
                    };
                    self.pos += 1;
                    let exp = if self.peek() == Some('^') {
                        self.pos += 1;
                        let digits = self.digits();
                        digits.parse::<u32>().map_err(|_| self.err("bad exponent"))?
                    } else {
                        1
                    };
                    mono.0[var] += exp;
                }
                Some(c) if c.is_ascii_digit() || c == '.' => {
                    coeff *= self.number()?;
                }
                _ => return Err(self.err("expected coefficient or variable")),
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((mono, coeff))
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn number(&mut self) -> Result<BigRational> {
        let int_part = self.digits();
        let mut value = if self.peek() == Some('.') {
            self.pos += 1;
            let frac = self.digits();
            parse_decimal(&int_part, &frac).ok_or_else(|| self.err("bad decimal"))?
        } else {
            let n: BigInt = int_part.parse().map_err(|_| self.err("bad integer"))?;
            BigRational::from_integer(n)
        };
        if self.peek() == Some('/') {
            self.pos += 1;
            let den: BigInt = self.digits().parse().map_err(|_| self.err("bad denominator"))?;
            if den.is_zero() {
                return Err(self.err("zero denominator"));
            }
            value /= BigRational::from_integer(den);
        }
        Ok(value)
    }
}

fn parse_decimal(int_part: &str, frac: &str) -> Option<BigRational> {
    if int_part.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(num, den))
}
