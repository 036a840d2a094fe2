//! Exact rational values and their text grammar.
//!
//! Every probability, bound, and solver coefficient in this crate is a
//! [`Rational`]: an arbitrary-precision fraction kept in lowest terms with a
//! positive denominator. There is no floating point anywhere; decimal input
//! strings are parsed as exact fractions over a power of ten.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact arbitrary-precision fraction. Always in lowest terms, denominator
/// positive (both maintained by the underlying representation).
pub type Rational = num_rational::BigRational;

/// Errors produced while parsing rational text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Shorthand constructor used pervasively in tests.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `[-]digits`, `[-]digits/digits`, or `[-]digits.digits` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let invalid = || ParseRationalError::Invalid(s.to_string());
    let value = if let Some((num, den)) = body.split_once('/') {
        let num = parse_digits(num).ok_or_else(invalid)?;
        let den = parse_digits(den).ok_or_else(invalid)?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        Rational::new(num.into(), den.into())
    } else if let Some((int, frac)) = body.split_once('.') {
        let int = parse_digits(int).ok_or_else(invalid)?;
        let frac_digits = frac.len();
        let frac = parse_digits(frac).ok_or_else(invalid)?;
        let scale = BigUint::from(10u32).pow(frac_digits as u32);
        Rational::new(BigInt::from(int * &scale + frac), BigInt::from(scale))
    } else {
        Rational::from_integer(parse_digits(body).ok_or_else(invalid)?.into())
    };
    Ok(if negative { -value } else { value })
}

fn parse_digits(s: &str) -> Option<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Canonical text form: `num/den`, or just `num` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering. Returns the digit string and whether it is exact.
///
/// The expansion terminates iff the reduced denominator is of the form
/// 2^a * 5^b; otherwise the result is truncated to `max_frac_digits` and
/// flagged inexact. The rational string stays authoritative either way.
pub fn decimal_string(r: &Rational, max_frac_digits: usize) -> (String, bool) {
    let negative = r.is_negative();
    let abs = r.abs();
    let int_part = abs.to_integer();
    let mut frac = &abs - Rational::from_integer(int_part.clone());
    let mut digits = String::new();
    let mut exact = true;
    for _ in 0..max_frac_digits {
        if frac.is_zero() {
            break;
        }
        frac *= Rational::from_integer(BigInt::from(10));
        let d = frac.to_integer();
        digits.push(char::from(b'0' + d.to_string().parse::<u8>().unwrap_or(0)));
        frac -= Rational::from_integer(d);
    }
    if !frac.is_zero() {
        exact = false;
    }
    let mut out = String::new();
    if negative && (!int_part.is_zero() || !digits.is_empty()) {
        out.push('-');
    }
    out.push_str(&int_part.to_string());
    if !digits.is_empty() {
        out.push('.');
        out.push_str(&digits);
    }
    (out, exact)
}
