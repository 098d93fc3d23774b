//! Exact rational helpers.
//!
//! Costs, weights and every threshold that decides an algorithm's output are
//! kept as [`Rational`]. The only irrational quantities that show up are
//! base-2 logarithms; those are either compared exactly through integer
//! powers ([`le_mul_log2`], [`lt_log2`]) or pinned to the exact dyadic value
//! of the IEEE `log2` result ([`log2_floor_one`]) so repeated runs agree bit
//! for bit.

use std::cmp::Ordering;
use std::fmt;

use num::bigint::Sign;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"7"`, `"3/2"`, `"-1.25"` or `"2e-3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = |reason| ParseRationalError {
        literal: text.to_string(),
        reason,
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(err("empty"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| err("bad numerator"))?;
        let d: BigInt = den.trim().parse().map_err(|_| err("bad denominator"))?;
        if d.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| err("bad exponent"))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(err("no digits"));
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("not a number"));
    }
    let all: BigInt = format!("{whole}{frac}").parse().map_err(|_| err("not a number"))?;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(all * num::pow(ten, scale as usize))
    } else {
        Rational::new(all, num::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    match (value.numer().to_f64(), value.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // huge numerator/denominator: shift both down before dividing
            let bits = value.numer().bits().max(value.denom().bits());
            let shift = bits.saturating_sub(900);
            let n = (value.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (value.denom() >> shift).to_f64().unwrap_or(1.0);
            if d == 0.0 {
                if value.is_positive() {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                n / d
            }
        }
    }
}

/// `max(1, log2(x))`, pinned to the exact binary value of the `f64` result.
pub fn log2_floor_one(x: &Rational) -> Rational {
    let l = to_f64(x).log2();
    if !(l > 1.0) {
        return Rational::one();
    }
    Rational::from_float(l).expect("finite log2")
}

/// `max(1, log2(x))` as an `f64`, for empirical bounds on sample means.
pub fn log2_floor_one_f64(x: f64) -> f64 {
    x.log2().max(1.0)
}

fn is_pow2_le(exp2: &BigInt, x: &Rational, power: &BigInt) -> bool {
    // 2^exp2 <= x^power, all exponents nonnegative, x > 0
    let e = exp2.to_usize().expect("exponent fits in usize");
    let p = power.to_usize().expect("exponent fits in usize");
    let lhs = num::pow(BigInt::from(2), e) * num::pow(x.denom().clone(), p);
    let rhs = num::pow(x.numer().clone(), p);
    lhs <= rhs
}

/// Exact test of `lhs <= coeff * max(1, log2(x))` for `coeff >= 0`, `x > 0`.
pub fn le_mul_log2(lhs: &Rational, coeff: &Rational, x: &Rational) -> bool {
    assert!(!coeff.is_negative() && x.is_positive());
    if lhs <= coeff {
        return true;
    }
    if coeff.is_zero() || *x <= int(2) {
        return false;
    }
    // lhs / coeff = a/b > 1, need 2^(a/b) <= x  <=>  2^a <= x^b
    let q = lhs / coeff;
    is_pow2_le(q.numer(), x, q.denom())
}

/// Exact test of `lhs < log2(x)` for `x > 0`.
pub fn lt_log2(lhs: &Rational, x: &Rational) -> bool {
    assert!(x.is_positive());
    if lhs.is_negative() {
        // 2^lhs < x  <=>  1 < x * 2^(-lhs)
        let q = -lhs;
        // x^b * 2^a > 1 always holds when x >= 1
        if *x >= Rational::one() {
            return true;
        }
        // compare 1 < x^b 2^a with lhs = -a/b
        let a = q.numer().to_usize().expect("exponent fits");
        let b = q.denom().to_usize().expect("exponent fits");
        return num::pow(x.numer().clone(), b) * num::pow(BigInt::from(2), a)
            > num::pow(x.denom().clone(), b);
    }
    // 2^(a/b) < x  <=>  2^a < x^b, i.e. not (x^b <= 2^a)
    let a = lhs.numer().to_usize().expect("exponent fits");
    let b = lhs.denom().to_usize().expect("exponent fits");
    num::pow(BigInt::from(2), a) * num::pow(x.denom().clone(), b) < num::pow(x.numer().clone(), b)
}

/// Exact test of `count <= ceil(coeff * log2(x))` for integer `count`.
pub fn le_ceil_mul_log2(count: u64, coeff: &Rational, x: &Rational) -> bool {
    if count == 0 {
        return true;
    }
    if coeff.is_zero() {
        return false;
    }
    // count <= ceil(y)  <=>  count - 1 < y  <=>  (count-1)/coeff < log2(x)
    let lhs = int(count as i64 - 1) / coeff;
    lt_log2(&lhs, x)
}

/// `ceil(log2(n))` computed on integers.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// `ceil(value * 2^64)` clamped to `[0, 2^64]`; used to turn a probability
/// into an exact integer threshold for a uniform `u64` draw.
pub fn probability_threshold(p: &Rational) -> u128 {
    if !p.is_positive() {
        return 0;
    }
    if *p >= Rational::one() {
        return 1u128 << 64;
    }
    let scaled = p * Rational::from_integer(BigInt::one() << 64u32);
    let c = scaled.ceil().to_integer();
    match c.sign() {
        Sign::Minus | Sign::NoSign => 0,
        Sign::Plus => c.to_u128().unwrap_or(1u128 << 64).min(1u128 << 64),
    }
}

pub fn min_one(x: &Rational) -> Rational {
    if *x > Rational::one() {
        Rational::one()
    } else {
        x.clone()
    }
}

/// Serde adapter that reads a cost as a JSON string (`"3/2"`, `"1.5"`) or a
/// JSON number, and writes the canonical string form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(pub Rational);

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        let text = match &value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => {
                return Err(de::Error::custom(format!(
                    "cost must be a string or number, got {other}"
                )))
            }
        };
        parse_rational(&text).map(Cost).map_err(de::Error::custom)
    }
}

pub fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/2").unwrap(), ratio(3, 2));
        assert_eq!(parse_rational("1.5").unwrap(), ratio(3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational("2e-3").unwrap(), ratio(1, 500));
        assert_eq!(parse_rational("12").unwrap(), int(12));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_rational(&ratio(6, 4)), "3/2");
        assert_eq!(format_rational(&int(5)), "5");
    }

    #[test]
    fn log_comparisons_are_exact() {
        // 3 <= 1 * log2(8) holds with equality
        assert!(le_mul_log2(&int(3), &int(1), &int(8)));
        assert!(!le_mul_log2(&int(4), &int(1), &int(8)));
        // LOG2 floor of one kicks in below 2
        assert!(le_mul_log2(&int(2), &int(2), &ratio(3, 2)));
        assert!(!le_mul_log2(&int(3), &int(2), &ratio(3, 2)));
        // 2 < log2(5) ~ 2.32
        assert!(lt_log2(&int(2), &int(5)));
        assert!(!lt_log2(&int(3), &int(5)));
        assert!(lt_log2(&int(-1), &ratio(1, 1)));
        assert!(!lt_log2(&int(-1), &ratio(1, 2)));
        assert!(lt_log2(&int(-2), &ratio(1, 2)));
    }

    #[test]
    fn ceil_log_bound() {
        // ceil(2 * log2(9)) = ceil(6.34) = 7
        assert!(le_ceil_mul_log2(7, &int(2), &int(9)));
        assert!(!le_ceil_mul_log2(8, &int(2), &int(9)));
        // exact power: ceil(1 * log2(8)) = 3
        assert!(le_ceil_mul_log2(3, &int(1), &int(8)));
        assert!(!le_ceil_mul_log2(4, &int(1), &int(8)));
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(36), 6);
    }

    #[test]
    fn log2_floor_is_pinned() {
        assert_eq!(log2_floor_one(&int(8)), int(3));
        assert_eq!(log2_floor_one(&int(1)), int(1));
        assert_eq!(log2_floor_one(&int(2)), int(1));
    }

    #[test]
    fn thresholds() {
        assert_eq!(probability_threshold(&int(0)), 0);
        assert_eq!(probability_threshold(&int(2)), 1u128 << 64);
        assert_eq!(probability_threshold(&ratio(1, 2)), 1u128 << 63);
        assert_eq!(probability_threshold(&ratio(1, 3)), ((1u128 << 64) + 2) / 3);
    }
}
