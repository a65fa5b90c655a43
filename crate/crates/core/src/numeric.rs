//! Exact rational arithmetic helpers and the [`Money`] amount type.
//!
//! Every energy and cost quantity is carried as a `Ratio<i128>` so that
//! equilibrium grouping and bill conservation are never disturbed by
//! floating-point noise. Rounding happens only when a value is displayed.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational number used throughout the crate.
pub type Q = Ratio<i128>;

pub fn q(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn frac(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

/// Parses `"3"`, `"-1.25"`, `"2/3"` or `"1e-2"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Q> {
    let err = || Error::ParseRational(text.to_string());
    let t = text.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| err())?;
        let d: i128 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exponent) = match t.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: i128 = if joined.is_empty() {
        0
    } else {
        joined.parse().map_err(|_| err())?
    };
    let scale = exponent - frac_part.len() as i32;
    if scale.unsigned_abs() > 30 {
        return Err(err());
    }
    let pow = 10i128.pow(scale.unsigned_abs());
    let mut value = if scale >= 0 {
        Q::from_integer(numer.checked_mul(pow).ok_or_else(err)?)
    } else {
        Q::new(numer, pow)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Canonical text form: a terminating decimal when one exists, `p/q` otherwise.
pub fn format_rational(value: &Q) -> String {
    let mut den = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    if places == 0 {
        return value.numer().to_string();
    }
    let scaled = value * Q::from_integer(10i128.pow(places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places as usize + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - places as usize);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// Rounds to `places` decimals, halves away from zero.
pub fn round_half_away(value: &Q, places: u32) -> Q {
    let factor = Q::from_integer(10i128.pow(places));
    let scaled = value * factor;
    let (quot, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem.abs() * 2;
    let bump = if twice >= *scaled.denom() { scaled.numer().signum() } else { 0 };
    Q::new(quot + bump, 10i128.pow(places))
}

/// Fixed-point decimal rendering after half-away-from-zero rounding.
pub fn format_fixed(value: &Q, places: u32) -> String {
    let rounded = round_half_away(value, places);
    let scaled = (rounded * Q::from_integer(10i128.pow(places))).to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let digits = format!("{:0>width$}", scaled.abs(), width = places as usize + 1);
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let (int_part, frac_part) = digits.split_at(digits.len() - places as usize);
    format!("{sign}{int_part}.{frac_part}")
}

pub fn to_f64(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// An exact amount of cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(pub Q);

impl Money {
    pub const ZERO: Money = Money(Q::new_raw(0, 1));

    pub fn cents(&self) -> Q {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }

    /// Cents rounded half away from zero to two decimals.
    pub fn rounded(&self) -> Q {
        round_half_away(&self.0, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_fixed(&self.0, 2))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map(Money).map_err(serde::de::Error::custom)
    }
}
