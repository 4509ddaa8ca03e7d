//! Real numbers stored as sign and log-magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A real number `sign * exp(ln_abs)`.
///
/// Zero is represented with sign `0` and `ln_abs = -inf`. Arithmetic never
/// overflows for magnitudes that fit in an `f64` exponent, which makes the
/// type suitable for products of many factorials and gamma functions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SignedLogReal {
    ln_abs: f64,
    sign: i8,
}

impl SignedLogReal {
    pub const ZERO: Self = Self { ln_abs: f64::NEG_INFINITY, sign: 0 };
    pub const ONE: Self = Self { ln_abs: 0.0, sign: 1 };

    /// Builds from a log-magnitude and a sign in {-1, 0, 1}.
    pub fn new(ln_abs: f64, sign: i8) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { ln_abs, sign: sign.signum() }
        }
    }

    /// Positive number `exp(ln)`.
    pub fn from_ln(ln: f64) -> Self {
        Self::new(ln, 1)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self { ln_abs: x.abs().ln(), sign: if x > 0.0 { 1 } else { -1 } }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln_abs.exp(),
        }
    }

    /// Natural log of the magnitude; `-inf` for zero.
    pub fn ln_abs(self) -> f64 {
        self.ln_abs
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_finite(self) -> bool {
        self.sign == 0 || self.ln_abs.is_finite()
    }

    pub fn abs(self) -> Self {
        Self { ln_abs: self.ln_abs, sign: self.sign.abs() }
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        Self { ln_abs: -self.ln_abs, sign: self.sign }
    }

    /// `|x|^p` carrying the sign only for integer `p`.
    ///
    /// Negative bases with non-integer exponents yield NaN magnitude.
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Self::ONE;
        }
        match self.sign {
            0 => {
                if p > 0.0 {
                    Self::ZERO
                } else {
                    Self { ln_abs: f64::INFINITY, sign: 1 }
                }
            }
            1 => Self { ln_abs: p * self.ln_abs, sign: 1 },
            _ => {
                if p.fract() != 0.0 {
                    Self { ln_abs: f64::NAN, sign: 1 }
                } else {
                    let odd = (p.abs() % 2.0) == 1.0;
                    Self { ln_abs: p * self.ln_abs, sign: if odd { -1 } else { 1 } }
                }
            }
        }
    }

    /// Integer power, exact in sign.
    pub fn powi(self, k: i32) -> Self {
        self.powf(f64::from(k))
    }

    /// Sum of many terms with a single max shift per sign class.
    pub fn sum_slice(terms: &[Self]) -> Self {
        let (mut pos_max, mut neg_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in terms {
            match t.sign {
                1 => pos_max = pos_max.max(t.ln_abs),
                -1 => neg_max = neg_max.max(t.ln_abs),
                _ => {}
            }
        }
        let class = |sign: i8, m: f64| -> Self {
            if m == f64::NEG_INFINITY {
                return Self::ZERO;
            }
            if m == f64::INFINITY {
                return Self::new(f64::INFINITY, sign);
            }
            let s: f64 = terms
                .iter()
                .filter(|t| t.sign == sign)
                .map(|t| (t.ln_abs - m).exp())
                .sum();
            Self::new(m + s.ln(), sign)
        };
        class(1, pos_max) + class(-1, neg_max)
    }

    /// Relative difference `|a - b| / max(|a|, |b|)` computed in log space.
    pub fn rel_diff(self, other: Self) -> f64 {
        if self.sign == 0 && other.sign == 0 {
            return 0.0;
        }
        if self.sign != other.sign {
            return if self.sign == 0 || other.sign == 0 { 1.0 } else { 2.0 };
        }
        let d = (self.ln_abs - other.ln_abs).abs();
        -(-d).exp_m1()
    }
}

impl Default for SignedLogReal {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for SignedLogReal {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl PartialEq for SignedLogReal {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.ln_abs == other.ln_abs)
    }
}

impl PartialOrd for SignedLogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.ln_abs.partial_cmp(&other.ln_abs),
                _ => other.ln_abs.partial_cmp(&self.ln_abs),
            },
            o => Some(o),
        }
    }
}

impl Neg for SignedLogReal {
    type Output = Self;
    fn neg(self) -> Self {
        Self { ln_abs: self.ln_abs, sign: -self.sign }
    }
}

impl Mul for SignedLogReal {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        Self { ln_abs: self.ln_abs + rhs.ln_abs, sign: self.sign * rhs.sign }
    }
}

impl Div for SignedLogReal {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(rhs.sign != 0, "division by zero");
        if self.sign == 0 {
            return Self::ZERO;
        }
        Self { ln_abs: self.ln_abs - rhs.ln_abs, sign: self.sign * rhs.sign }
    }
}

impl Add for SignedLogReal {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln_abs >= rhs.ln_abs { (self, rhs) } else { (rhs, self) };
        if big.ln_abs == f64::INFINITY {
            return big;
        }
        let d = small.ln_abs - big.ln_abs;
        if big.sign == small.sign {
            Self { ln_abs: big.ln_abs + d.exp().ln_1p(), sign: big.sign }
        } else if d == 0.0 {
            Self::ZERO
        } else {
            Self { ln_abs: big.ln_abs + (-d.exp()).ln_1p(), sign: big.sign }
        }
    }
}

impl Sub for SignedLogReal {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Sum for SignedLogReal {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let terms: Vec<Self> = iter.collect();
        Self::sum_slice(&terms)
    }
}

impl fmt::Display for SignedLogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.ln_abs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_and_zero() {
        assert_eq!(SignedLogReal::from_f64(0.0), SignedLogReal::ZERO);
        assert_eq!(SignedLogReal::from_f64(-2.5).to_f64(), -2.5);
        assert_eq!(SignedLogReal::from_f64(3.0).sign(), 1);
    }

    #[test]
    fn exact_cancellation_is_zero() {
        let a = SignedLogReal::from_f64(1.25);
        assert!((a - a).is_zero());
    }

    #[test]
    fn huge_magnitudes_do_not_overflow() {
        let a = SignedLogReal::from_ln(5000.0);
        let b = SignedLogReal::from_ln(4999.0);
        let s = a + b;
        assert!((s.ln_abs() - (5000.0 + (-1.0f64).exp().ln_1p())).abs() < 1e-12);
        assert!(((a * b).ln_abs() - 9999.0).abs() < 1e-12);
    }

    #[test]
    fn odd_and_even_powers() {
        let m = SignedLogReal::from_f64(-2.0);
        assert_eq!(m.powi(3).sign(), -1);
        assert_eq!(m.powi(2).sign(), 1);
        assert!((m.powi(3).to_f64() + 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_f64(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let (sa, sb) = (SignedLogReal::from_f64(a), SignedLogReal::from_f64(b));
            let tol = 1e-12 * (a.abs() + b.abs()).max(1e-300);
            prop_assert!(((sa + sb).to_f64() - (a + b)).abs() <= tol);
            prop_assert!(((sa - sb).to_f64() - (a - b)).abs() <= tol);
            prop_assert!(((sa * sb).to_f64() - a * b).abs() <= 1e-12 * (a * b).abs());
            if b != 0.0 {
                prop_assert!(((sa / sb).to_f64() - a / b).abs() <= 1e-12 * (a / b).abs());
            }
        }

        #[test]
        fn sum_slice_matches_pairwise(v in proptest::collection::vec(-50f64..50.0, 1..20)) {
            let terms: Vec<_> = v.iter().map(|&x| SignedLogReal::from_f64(x)).collect();
            let direct: f64 = v.iter().sum();
            let scale: f64 = v.iter().map(|x| x.abs()).sum();
            prop_assert!((SignedLogReal::sum_slice(&terms).to_f64() - direct).abs() <= 1e-12 * scale);
        }
    }
}
