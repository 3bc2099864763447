//! Polynomials in `γ` with exact rational coefficients.

use std::fmt;
use std::ops::{Add, Mul};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Ascending coefficients; trailing zeros are always trimmed, so `0` has no coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoeffPoly {
    coefficients: Vec<BigRational>,
}

impl CoeffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_coefficients(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn from_integers(cs: &[i64]) -> Self {
        Self::from_coefficients(cs.iter().map(|&c| BigRational::from_integer(BigInt::from(c))).collect())
    }

    pub fn from_coefficients(mut coefficients: Vec<BigRational>) -> Self {
        while coefficients.last().is_some_and(|c| c.is_zero()) {
            coefficients.pop();
        }
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn eval(&self, gamma: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * gamma + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn eval_exact(&self, gamma: &BigRational) -> BigRational {
        self.coefficients
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * gamma + c)
    }

    /// Semicolon-separated ascending coefficients, each as `p` or `p/q`.
    pub fn to_rational_list(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        self.coefficients.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
    }
}

impl Add for &CoeffPoly {
    type Output = CoeffPoly;

    fn add(self, rhs: &CoeffPoly) -> CoeffPoly {
        let n = self.coefficients.len().max(rhs.coefficients.len());
        let zero = BigRational::zero();
        CoeffPoly::from_coefficients(
            (0..n)
                .map(|k| self.coefficients.get(k).unwrap_or(&zero) + rhs.coefficients.get(k).unwrap_or(&zero))
                .collect(),
        )
    }
}

impl Mul for &CoeffPoly {
    type Output = CoeffPoly;

    fn mul(self, rhs: &CoeffPoly) -> CoeffPoly {
        if self.is_zero() || rhs.is_zero() {
            return CoeffPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coefficients.len() + rhs.coefficients.len() - 1];
        for (i, a) in self.coefficients.iter().enumerate() {
            for (j, b) in rhs.coefficients.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CoeffPoly::from_coefficients(out)
    }
}

impl fmt::Display for CoeffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coefficients.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sep = if first {
                if c.is_negative() { "-" } else { "" }
            } else if c.is_negative() {
                " - "
            } else {
                " + "
            };
            write!(f, "{sep}")?;
            let mag = c.abs();
            match k {
                0 => write!(f, "{mag}")?,
                _ if mag.is_one() => {}
                _ => write!(f, "{mag}·")?,
            }
            match k {
                0 => {}
                1 => write!(f, "γ")?,
                _ => write!(f, "γ^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}
