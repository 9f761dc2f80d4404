//! Scalar abstraction for the simplex solver.
//!
//! The solver is written once against [`LpScalar`]. Exact instantiations
//! ([`BigRational`]) pivot on true zero tests; floating instantiations use a
//! small absolute tolerance and are only used as cross-checks.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

pub trait LpScalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync {
    /// Absolute threshold under which a value counts as zero.
    fn tolerance() -> Self;

    /// `true` when arithmetic is exact and `tolerance()` is zero.
    fn is_exact() -> bool;

    fn from_rational(r: &BigRational) -> Self;

    fn to_f64(&self) -> f64;

    fn is_pos(&self) -> bool {
        *self > Self::tolerance()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::tolerance()
    }

    fn approx_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }
}

impl LpScalar for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn is_exact() -> bool {
        true
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ratio_to_f64(self)
    }

    fn is_pos(&self) -> bool {
        self.is_positive()
    }

    fn is_neg(&self) -> bool {
        self.is_negative()
    }

    fn approx_zero(&self) -> bool {
        self.is_zero()
    }
}

impl LpScalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }

    fn is_exact() -> bool {
        false
    }

    fn from_rational(r: &BigRational) -> Self {
        ratio_to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl LpScalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }

    fn is_exact() -> bool {
        false
    }

    fn from_rational(r: &BigRational) -> Self {
        ratio_to_f64(r) as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

/// Converts a big rational to the nearest `f64`, staying accurate when the
/// numerator and denominator individually overflow.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db - 60;
    let scaled = if shift > 0 {
        r.numer() / (r.denom() << (shift as usize))
    } else {
        (r.numer() << ((-shift) as usize)) / r.denom()
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

/// Rounds `x` to the nearest multiple of `2^-bits`.
pub fn f64_to_fixed_ratio(x: f64, bits: u32) -> BigRational {
    let scale = 2f64.powi(bits as i32);
    let scaled = (x * scale).round();
    let numer = BigInt::from(scaled as i128);
    BigRational::new(numer, BigInt::one() << (bits as usize))
}
