//! Exact rational helpers.

use num_bigint::{BigInt, BigUint};
use num_integer::Roots;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{QmdError, Result};

/// Exact rational used for thresholds (ε, δ, α, A²) and lattice measures.
pub type Rational = Ratio<i128>;

/// Parses `0.1`, `1/10` or `3` exactly. Exponent notation is rejected.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || QmdError::Domain(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 30 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let d = 10i128.pow(frac.len() as u32);
    let r = Rational::new(n, d);
    Ok(if neg { -r } else { r })
}

pub fn to_big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Huge magnitudes: go through the integer part.
    let int = r.numer() / r.denom();
    int.to_f64().unwrap_or(if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Smallest integer `n >= 0` with `n * n >= v` (ceil of the square root).
pub fn ceil_sqrt_rational(v: &Rational) -> i64 {
    if *v <= Rational::zero() {
        return 0;
    }
    let approx = rational_to_f64(v).sqrt().ceil() as i64;
    let mut n = (approx - 2).max(0);
    while Rational::from_integer((n as i128) * (n as i128)) < *v {
        n += 1;
    }
    n
}

/// A rational upper bound on `sqrt(n)`, exact when `n` is a perfect square.
pub fn sqrt_upper(n: u64) -> BigRational {
    let r = n.sqrt();
    if r * r == n {
        return BigRational::from_integer(BigInt::from(r));
    }
    let scale = BigUint::from(10u32).pow(12);
    let scaled = (BigUint::from(n) * &scale * &scale).sqrt() + BigUint::one();
    BigRational::new(BigInt::from(scaled), BigInt::from(scale))
}

/// Decimal rendering of a big rational: an integer when exact, else `num/den`.
pub fn big_to_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter: a [`Rational`] as `"num/den"` (or an integer string).
pub mod serde_rational {
    use super::{parse_rational, rational_to_string, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for [`BigRational`].
pub mod serde_big {
    use super::big_to_string;
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&big_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<BigRational>().map_err(serde::de::Error::custom)
    }
}
