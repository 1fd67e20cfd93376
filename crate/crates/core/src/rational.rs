//! Exact rational arithmetic shared by every module.
//!
//! All scores, utilities, masses, and derived quantities are `BigRational`
//! values. Decimal text such as `0.95` is parsed to the exact fraction
//! `19/20`, so table reproductions are bit-exact rather than
//! floating-point-close.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational used throughout the crate.
pub type Q = BigRational;

/// Shorthand constructor for small rationals.
pub fn q(numer: i64, denom: i64) -> Q {
    Q::new(BigInt::from(numer), BigInt::from(denom))
}

/// Rational from an integer.
pub fn qi(value: i64) -> Q {
    Q::from_integer(BigInt::from(value))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `0.95`, `-1.5`, `3`, or `19/20` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Q, ParseRationalError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((n, d)) = s.split_once('/') {
        let numer: BigInt = n
            .trim()
            .parse()
            .map_err(|_| ParseRationalError::Invalid(text.to_string()))?;
        let denom: BigInt = d
            .trim()
            .parse()
            .map_err(|_| ParseRationalError::Invalid(text.to_string()))?;
        if denom.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(text.to_string()));
        }
        return Ok(Q::new(numer, denom));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(ParseRationalError::Invalid(text.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(ParseRationalError::Invalid(text.to_string()));
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits
            .parse()
            .map_err(|_| ParseRationalError::Invalid(text.to_string()))?
    };
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Q::new(numer * sign, denom))
}

/// Rounds to `places` decimal digits with round-half-even and renders the
/// result as a fixed-point string (the formatting used by the published
/// tables).
pub fn round_dec(value: &Q, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let negative = value.is_negative();
    let magnitude = value.abs();
    let scaled_numer = magnitude.numer() * &scale;
    let denom = magnitude.denom().clone();
    let (mut quot, rem) = num::Integer::div_rem(&scaled_numer, &denom);
    let twice = &rem * 2;
    if twice > denom || (twice == denom && num::Integer::is_odd(&quot)) {
        quot += 1;
    }
    let (int_part, frac_part) = num::Integer::div_rem(&quot, &scale);
    let mut out = String::new();
    if negative && !quot.is_zero() {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if places > 0 {
        let frac = frac_part.to_string();
        out.push('.');
        for _ in 0..(places as usize - frac.len()) {
            out.push('0');
        }
        out.push_str(&frac);
    }
    out
}

/// Three-decimal rendering used when reproducing published tables.
pub fn round3(value: &Q) -> String {
    round_dec(value, 3)
}

/// Lossy conversion for logging and benchmark reporting.
pub fn to_f64(value: &Q) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Renders a rational as `numer/denom` (or a bare integer).
pub fn display_exact(value: &Q) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Terminating decimal expansion, only when one exists (denominator of the
/// reduced fraction is 2^a * 5^b).
pub fn exact_decimal(value: &Q) -> Option<String> {
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut d = value.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let places = twos.max(fives);
    if places == 0 {
        return Some(value.numer().to_string());
    }
    let scale = BigInt::from(10u32).pow(places);
    let scaled = (value.numer() * &scale) / value.denom();
    let digits = scaled.abs().to_string();
    let digits = format!("{:0>width$}", digits, width = places as usize + 1);
    let split = digits.len() - places as usize;
    let sign = if value.is_negative() { "-" } else { "" };
    Some(format!("{sign}{}.{}", &digits[..split], &digits[split..]))
}
