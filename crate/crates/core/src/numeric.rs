//! Exact and floating-point scalar backends.
//!
//! Everything in the finite kernel algebra is generic over [`Scalar`], which is
//! implemented for [`BigRational`] (exact) and `f64`. Comparisons are always
//! routed through a [`NumericMode`] so the same code path decides exactly on
//! rationals and within a tolerance on floats.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LcgmError, Result};

pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericMode {
    Exact,
    Float(f64),
}

impl NumericMode {
    pub fn float(tolerance: f64) -> Result<Self> {
        if tolerance > 0.0 && tolerance.is_finite() {
            Ok(NumericMode::Float(tolerance))
        } else {
            Err(LcgmError::InvalidArgument(format!(
                "float tolerance must be positive, got {tolerance}"
            )))
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            NumericMode::Exact => 0.0,
            NumericMode::Float(t) => *t,
        }
    }

    pub fn is_zero<S: Scalar>(&self, x: &S) -> bool {
        match self {
            NumericMode::Exact => x.is_zero(),
            NumericMode::Float(t) => x.to_f64().abs() <= *t,
        }
    }

    /// Strictly positive: `> 0` exactly, or `> tol` in float mode.
    pub fn is_positive<S: Scalar>(&self, x: &S) -> bool {
        match self {
            NumericMode::Exact => *x > S::zero(),
            NumericMode::Float(t) => x.to_f64() > *t,
        }
    }

    pub fn is_nonnegative<S: Scalar>(&self, x: &S) -> bool {
        match self {
            NumericMode::Exact => *x >= S::zero(),
            NumericMode::Float(t) => x.to_f64() >= -*t,
        }
    }

    pub fn eq<S: Scalar>(&self, a: &S, b: &S) -> bool {
        match self {
            NumericMode::Exact => a == b,
            NumericMode::Float(t) => (a.to_f64() - b.to_f64()).abs() <= *t,
        }
    }
}

impl Display for NumericMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumericMode::Exact => write!(f, "exact"),
            NumericMode::Float(t) => write!(f, "float:{t}"),
        }
    }
}

impl std::str::FromStr for NumericMode {
    type Err = LcgmError;

    /// Accepts `exact` or `float:<tol>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(NumericMode::Exact);
        }
        match s.split_once(':') {
            Some((kind, tol)) if kind.eq_ignore_ascii_case("float") => {
                let tol: f64 = tol
                    .trim()
                    .parse()
                    .map_err(|_| LcgmError::Parse(format!("bad tolerance in mode `{s}`")))?;
                NumericMode::float(tol)
            }
            _ => Err(LcgmError::Parse(format!(
                "unknown numeric mode `{s}` (expected `exact` or `float:<tol>`)"
            ))),
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;

    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Mode used when none is supplied: exact for rationals, 1e-9 for floats.
    fn default_mode() -> NumericMode {
        if Self::EXACT {
            NumericMode::Exact
        } else {
            NumericMode::Float(1e-9)
        }
    }

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::from_ratio(numer, denom)
}

/// Parses `p/q`, `p`, `-p/q`, or a terminating decimal such as `-0.125`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || LcgmError::Parse(format!("`{s}` is not a rational of the form p/q"));
    if let Some((int, frac)) = s.split_once('.') {
        if s.contains('/') || frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = if int.is_empty() || int == "-" || int == "+" {
            format!("{int}0")
        } else {
            int.to_string()
        };
        let whole = parse_rational(&digits).map_err(|_| bad())?;
        if frac.len() > 4096 {
            return Err(bad());
        }
        let scale = BigInt::from(10u8).pow(frac.len() as u32);
        let f = BigRational::new(frac.parse::<BigInt>().map_err(|_| bad())?, scale);
        let negative = int.trim_start().starts_with('-');
        return Ok(if negative { whole - f } else { whole + f });
    }
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let valid = |t: &str, allow_sign: bool| {
        let digits = if allow_sign {
            t.strip_prefix('-').or_else(|| t.strip_prefix('+')).unwrap_or(t)
        } else {
            t
        };
        !digits.is_empty() && digits.len() <= 4096 && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !valid(n, true) || !valid(d, false) {
        return Err(bad());
    }
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(LcgmError::Parse(format!("zero denominator in `{s}`")));
    }
    Ok(BigRational::new(n, d))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Best rational approximation of `x` with denominator at most `max_denom`
/// (continued fractions).
pub fn rational_approx(x: f64, max_denom: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let negative = x < 0.0;
    let mut v = x.abs();
    let (mut h0, mut h1): (i128, i128) = (0, 1);
    let (mut k0, mut k1): (i128, i128) = (1, 0);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let a_i = a as i128;
        let h2 = a_i * h1 + h0;
        let k2 = a_i * k1 + k0;
        if k2 > max_denom as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if k1 == 0 {
        return None;
    }
    let r = BigRational::new(BigInt::from(h1), BigInt::from(k1));
    Some(if negative { -r } else { r })
}

/// Rank of a dense matrix (row-major) by Gaussian elimination, with zero tests
/// routed through `mode`.
pub fn rank<S: Scalar>(rows: &[Vec<S>], mode: NumericMode) -> usize {
    let mut m: Vec<Vec<S>> = rows.to_vec();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        // partial pivoting: largest magnitude (helps the float path)
        let pivot = (rank..nrows)
            .filter(|&r| !mode.is_zero(&m[r][col]))
            .max_by(|&a, &b| {
                m[a][col]
                    .abs_value()
                    .partial_cmp(&m[b][col].abs_value())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(p) = pivot else { continue };
        m.swap(rank, p);
        let pivot_val = m[rank][col].clone();
        for r in (rank + 1)..nrows {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone() / pivot_val.clone();
            for c in col..ncols {
                let delta = factor.clone() * m[rank][c].clone();
                m[r][c] = m[r][c].clone() - delta;
            }
        }
        rank += 1;
    }
    rank
}
