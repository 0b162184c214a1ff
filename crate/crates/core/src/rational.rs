//! Exact rational helpers shared across the crate.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses a plain decimal (`0.05`, `1e-3` is not accepted) or a fraction
/// (`1/20`) into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse `{text}` as a rational"));
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{whole}{frac}");
    let num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let den = num_traits::pow(BigInt::from(10u32), frac.len());
    let value = Rational::new(num, den);
    Ok(if neg { -value } else { value })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Decimal rendering with `places` digits after the point, rounded half away
/// from zero.
pub fn to_decimal_string(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10u32), places);
    let scaled = r * Rational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.sign() == Sign::Minus;
    let abs = rounded.abs();
    let (whole, frac) = abs.div_rem(&scale);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&whole.to_string());
    if places > 0 {
        out.push('.');
        out.push_str(&format!("{:0>width$}", frac.to_string(), width = places));
    }
    out
}

/// `floor(r * 2^shift)` as an i128, or `None` when it does not fit.
pub fn floor_fixed(r: &Rational, shift: u32) -> Option<i128> {
    (r * Rational::from_integer(BigInt::one() << shift))
        .floor()
        .to_integer()
        .to_i128()
}

/// `ceil(r * 2^shift)` as an i128, or `None` when it does not fit.
pub fn ceil_fixed(r: &Rational, shift: u32) -> Option<i128> {
    (r * Rational::from_integer(BigInt::one() << shift))
        .ceil()
        .to_integer()
        .to_i128()
}

/// Least common multiple of the denominators of `values` (1 for an empty set).
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// `r * scale` as an integer; `scale` must be a multiple of `r`'s denominator.
pub fn scale_exact(r: &Rational, scale: &BigInt) -> BigInt {
    debug_assert!((scale % r.denom()).is_zero());
    r.numer() * (scale / r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("0.05").unwrap(), ratio(1, 20));
        assert_eq!(parse_rational("1/20").unwrap(), ratio(1, 20));
        assert_eq!(parse_rational("-2.5").unwrap(), ratio(-5, 2));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("3").unwrap(), int(3));
        assert!(parse_rational("1e-3").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn decimal_rendering_rounds() {
        assert_eq!(to_decimal_string(&ratio(1000, 1001), 10), "0.9990009990");
        assert_eq!(to_decimal_string(&ratio(-1, 3), 4), "-0.3333");
        assert_eq!(to_decimal_string(&int(1), 2), "1.00");
    }

    #[test]
    fn fixed_point_brackets_value() {
        let r = ratio(1, 3);
        let lo = floor_fixed(&r, 10).unwrap();
        let hi = ceil_fixed(&r, 10).unwrap();
        assert_eq!(hi - lo, 1);
        assert!(Rational::new(BigInt::from(lo), BigInt::from(1024)) <= r);
        assert_eq!(floor_fixed(&ratio(-1, 3), 10).unwrap(), -342);
    }
}
