//! Scalar types used for measure masses.
//!
//! Two representations are provided: exact [`Rational`] (arbitrary precision)
//! and `f64`. Exact masses are used wherever identities are asserted to the
//! last bit; doubles for long convolution chains where rationals would blow
//! up.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Atoms lighter than this fraction of the total are dropped in double mode.
pub const F64_PRUNE_RELATIVE: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse mass `{0}`")]
pub struct ParseMassError(pub String);

pub trait Mass:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    fn from_u64(v: u64) -> Self;

    /// Parses a decimal (`0.25`) or a fraction (`1/4`).
    fn parse_mass(text: &str) -> Result<Self, ParseMassError>;

    /// Whether an atom of mass `self` should be dropped from a measure whose
    /// total is `total`.
    fn negligible(&self, total: &Self) -> bool;

    /// Equality up to the representation's tolerance (`tol` is ignored for
    /// exact masses).
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;

    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    fn min_of(&self, other: &Self) -> Self {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    fn to_json(&self) -> serde_json::Value;
}

impl Mass for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_u64(v: u64) -> Self {
        v as f64
    }

    fn parse_mass(text: &str) -> Result<Self, ParseMassError> {
        let t = text.trim();
        let v = match t.split_once('/') {
            Some((n, d)) => {
                let n: f64 = n.trim().parse().map_err(|_| ParseMassError(t.into()))?;
                let d: f64 = d.trim().parse().map_err(|_| ParseMassError(t.into()))?;
                n / d
            }
            None => t.parse().map_err(|_| ParseMassError(t.into()))?,
        };
        if !v.is_finite() {
            return Err(ParseMassError(t.into()));
        }
        Ok(v)
    }

    fn negligible(&self, total: &Self) -> bool {
        *self <= 0.0 || *self < F64_PRUNE_RELATIVE * total
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

impl Mass for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn parse_mass(text: &str) -> Result<Self, ParseMassError> {
        let t = text.trim();
        let bad = || ParseMassError(t.to_string());
        if let Some((n, d)) = t.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(BigRational::new(n, d));
        }
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        if !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let num: BigInt = digits.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        let r = BigRational::new(num, den);
        Ok(if neg { -r } else { r })
    }

    fn negligible(&self, _total: &Self) -> bool {
        !self.is_positive()
    }

    fn approx_eq(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
}

/// Builds `num/den` in any mass representation.
pub fn ratio<M: Mass>(num: u64, den: u64) -> M {
    M::from_u64(num) / M::from_u64(den)
}
