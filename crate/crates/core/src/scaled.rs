//! Floating-point values with an unbounded binary exponent.
//!
//! Sampling weights of the form `(1+eps)^y` routinely exceed the `f64`
//! exponent range, so totals and products are carried as `mant * 2^exp` with
//! `mant` in `[1, 2)` (or exactly zero).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

/// `2^e` as an `f64`, flushing to zero below the subnormal range and to
/// infinity above the finite range.
pub fn pow2(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// Splits a finite positive `v` into `(m, e)` with `v = m * 2^e`, `m` in `[1, 2)`.
pub fn frexp(v: f64) -> (f64, i64) {
    debug_assert!(v > 0.0 && v.is_finite());
    let bits = v.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal: renormalize through an exact power-of-two multiply
        let (m, e) = frexp(v * pow2(64));
        return (m, e - 64);
    }
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
    (m, raw - 1023)
}

/// `floor(log2(v))` for finite positive `v`, read from the exponent field.
pub fn floor_log2(v: f64) -> i64 {
    frexp(v).1
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledF64 {
    mant: f64,
    exp: i64,
}

impl ScaledF64 {
    pub const ZERO: ScaledF64 = ScaledF64 { mant: 0.0, exp: 0 };
    pub const ONE: ScaledF64 = ScaledF64 { mant: 1.0, exp: 0 };

    /// Builds `mant * 2^exp` from any finite nonnegative `mant`.
    pub fn new(mant: f64, exp: i64) -> Self {
        assert!(mant >= 0.0 && mant.is_finite(), "ScaledF64 requires finite nonnegative mantissa, got {mant}");
        if mant == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = frexp(mant);
        ScaledF64 { mant: m, exp: e + exp }
    }

    pub fn from_f64(v: f64) -> Self {
        Self::new(v, 0)
    }

    pub fn mantissa(&self) -> f64 {
        self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant == 0.0
    }

    /// Nearest `f64`; may overflow to infinity or underflow to zero.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.exp < -1022 {
            // split so the partial product stays normal
            return self.mant * pow2(self.exp + 64) * pow2(-64);
        }
        self.mant * pow2(self.exp)
    }

    /// `self / other` as an `f64`.
    pub fn ratio(&self, other: &ScaledF64) -> f64 {
        assert!(!other.is_zero(), "division by zero ScaledF64");
        if self.is_zero() {
            return 0.0;
        }
        ScaledF64::new(self.mant / other.mant, self.exp - other.exp).to_f64()
    }

    /// Multiplies by `2^k` exactly.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            *self
        } else {
            ScaledF64 { mant: self.mant, exp: self.exp + k }
        }
    }

    /// `self - other` as a signed `f64` ratio relative to `reference`.
    pub fn diff_relative(&self, other: &ScaledF64, reference: &ScaledF64) -> f64 {
        self.ratio(reference) - other.ratio(reference)
    }
}

impl Add for ScaledF64 {
    type Output = ScaledF64;

    fn add(self, rhs: ScaledF64) -> ScaledF64 {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exp >= rhs.exp { (self, rhs) } else { (rhs, self) };
        let gap = hi.exp - lo.exp;
        let sum = hi.mant + lo.mant * pow2(-gap);
        ScaledF64::new(sum, hi.exp)
    }
}

impl Mul for ScaledF64 {
    type Output = ScaledF64;

    fn mul(self, rhs: ScaledF64) -> ScaledF64 {
        if self.is_zero() || rhs.is_zero() {
            return ScaledF64::ZERO;
        }
        ScaledF64::new(self.mant * rhs.mant, self.exp + rhs.exp)
    }
}

impl PartialOrd for ScaledF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => match self.exp.cmp(&other.exp) {
                Ordering::Equal => self.mant.partial_cmp(&other.mant),
                o => Some(o),
            },
        }
    }
}

impl std::iter::Sum for ScaledF64 {
    fn sum<I: Iterator<Item = ScaledF64>>(iter: I) -> ScaledF64 {
        iter.fold(ScaledF64::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for ScaledF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mant, self.exp)
    }
}
