use std::cmp::Ordering;
use std::ops::{Mul, Neg};

use serde::Serialize;

/// Signed real stored as `sign · e^{log_abs}`; zero is `(0, -∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    sign: i8,
    log_abs: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogValue = LogValue { sign: 1, log_abs: 0.0 };

    pub fn new(sign: i8, log_abs: f64) -> Self {
        if sign == 0 || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_abs,
            }
        }
    }

    /// Positive value `e^{log_abs}`.
    pub fn from_log(log_abs: f64) -> Self {
        Self::new(1, log_abs)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::new(if x > 0.0 { 1 } else { -1 }, x.abs().ln())
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// May overflow to `±∞` or underflow to `0`.
    pub fn to_f64(&self) -> f64 {
        f64::from(self.sign) * self.log_abs.exp()
    }

    pub fn abs(&self) -> Self {
        Self::new(self.sign.abs(), self.log_abs)
    }

    /// Multiplies by `e^{shift}`.
    pub fn scale_exp(&self, shift: f64) -> Self {
        Self::new(self.sign, self.log_abs + shift)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::ONE;
        }
        let sign = if n % 2 == 0 { self.sign.abs() } else { self.sign };
        Self::new(sign, self.log_abs * f64::from(n))
    }

    pub fn sqrt_abs(&self) -> Self {
        Self::new(self.sign.abs(), 0.5 * self.log_abs)
    }

    /// Signed log-sum-exp.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.log_abs >= other.log_abs { (self, other) } else { (other, self) };
        let ratio = (small.log_abs - big.log_abs).exp();
        if big.sign == small.sign {
            Self::new(big.sign, big.log_abs + ratio.ln_1p())
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.log_abs + (-ratio).ln_1p())
        }
    }

    pub fn sum<'a>(values: impl IntoIterator<Item = &'a LogValue>) -> Self {
        values.into_iter().fold(Self::ZERO, |acc, v| acc.add(v))
    }

    /// Total order on the represented reals.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.log_abs.total_cmp(&other.log_abs),
                _ => other.log_abs.total_cmp(&self.log_abs),
            },
            o => o,
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::new(self.sign * rhs.sign, self.log_abs + rhs.log_abs)
    }
}

impl Neg for LogValue {
    type Output = LogValue;

    fn neg(self) -> LogValue {
        LogValue::new(-self.sign, self.log_abs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_sentinel() {
        assert!(LogValue::from_f64(0.0).is_zero());
        assert_eq!(LogValue::new(1, f64::NEG_INFINITY), LogValue::ZERO);
        assert_eq!(LogValue::new(0, 3.0), LogValue::ZERO);
        assert_eq!(LogValue::ZERO.to_f64(), 0.0);
    }

    #[test]
    fn cancellation_is_exact_zero() {
        let a = LogValue::from_f64(2.5);
        assert!(a.add(&-a).is_zero());
    }

    #[test]
    fn huge_magnitudes_do_not_overflow() {
        let a = LogValue::from_log(1e4);
        let b = LogValue::from_log(1e4 - 2f64.ln());
        assert!((a.add(&b).log_abs() - (1e4 + 1.5f64.ln())).abs() < 1e-9);
        assert!((a.add(&-b).log_abs() - (1e4 - 2f64.ln())).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let (a, b) = (LogValue::from_f64(x), LogValue::from_f64(y));
            let s = a.add(&b).to_f64();
            prop_assert!((s - (x + y)).abs() <= 1e-12 * (x.abs() + y.abs()).max(1e-300));
            let p = (a * b).to_f64();
            prop_assert!((p - x * y).abs() <= 1e-12 * (x * y).abs());
            prop_assert_eq!(a.cmp_value(&b), x.partial_cmp(&y).unwrap());
        }

        #[test]
        fn powers(x in -50f64..50.0, n in 0i32..5) {
            let a = LogValue::from_f64(x);
            let expected = x.powi(n);
            prop_assert!((a.powi(n).to_f64() - expected).abs() <= 1e-11 * expected.abs().max(1.0));
        }
    }
}
