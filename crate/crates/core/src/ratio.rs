//! Exact rational helpers shared by every monetary computation.
//!
//! Amounts and prices are `BigRational` end to end. Text forms accept
//! `n/d`, plain integers, decimals (`0.999`) and scientific notation
//! (`9.99e-1`); output is always the canonical `n/d` (or `n` when integral).

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRationalError(pub String);

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn parse(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| err())?;
        let d: BigInt = d.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(n, d));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, fraction) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && fraction.is_empty() {
        return Err(err());
    }
    if !whole.chars().chain(fraction.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let joined = format!("{whole}{fraction}");
    let mut numer: BigInt = joined.parse().map_err(|_| err())?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - fraction.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Canonical exact text form.
pub fn format(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Display adapter printing a rational as a (lossy) decimal, for humans.
pub struct Approx<'a>(pub &'a Rational);

impl fmt::Display for Approx<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", to_f64(self.0))
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Rounds a non-negative float down onto a grid of `1/scale`.
pub fn from_f64_floor(value: f64, scale: u64) -> Rational {
    let scaled = (value.max(0.0) * scale as f64).floor();
    let numer = BigInt::from(scaled as u128);
    Rational::new(numer, BigInt::from(scale))
}

/// Largest multiple of `1/scale` not above `value`.
pub fn floor_to(value: &Rational, scale: u64) -> Rational {
    let scale = BigInt::from(scale);
    Rational::new((value * Rational::from_integer(scale.clone())).floor().to_integer(), scale)
}

pub fn abs(value: &Rational) -> Rational {
    value.abs()
}

/// `|a / b - 1|`, with `None` when `b` is zero.
pub fn relative_deviation(a: &Rational, b: &Rational) -> Option<Rational> {
    if b.is_zero() {
        return None;
    }
    Some((a / b - one()).abs())
}

/// Serde adapter storing a rational as its canonical string.
pub mod serde_text {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = RawNumber::deserialize(d)?;
        raw.into_rational().map_err(serde::de::Error::custom)
    }

    /// Accepts strings as well as bare TOML/JSON numbers.
    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum RawNumber {
        Text(String),
        Int(i64),
        Float(f64),
    }

    impl RawNumber {
        pub(crate) fn into_rational(self) -> Result<Rational, ParseRationalError> {
            match self {
                RawNumber::Text(t) => parse(&t),
                RawNumber::Int(i) => Ok(int(i)),
                // Floats go through their shortest decimal form so 0.1 stays 1/10.
                RawNumber::Float(f) => parse(&format!("{f}")),
            }
        }
    }
}

/// Serde adapter for `BTreeMap<String, Rational>`.
pub mod serde_text_map {
    use super::*;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        value: &BTreeMap<String, Rational>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(value.len()))?;
        for (k, v) in value {
            map.serialize_entry(k, &format(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, Rational>, D::Error> {
        let raw = BTreeMap::<String, serde_text::RawNumber>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                v.into_rational()
                    .map(|r| (k, r))
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}
