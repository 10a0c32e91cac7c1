//! Canonical answer strings, with exact evaluation of simple arithmetic.

use std::sync::LazyLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("division by zero in {0:?}")]
    DivisionByZero(String),
}

const NUMBER: &str = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)";

static EXPR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^({NUMBER})(?:\s*([-+*/])\s*({NUMBER}))?$")).expect("valid pattern"));

fn parse_decimal(s: &str) -> BigRational {
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = format!("{int}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().expect("digits only")
    };
    let denom = BigInt::from(10u32).pow(frac.len() as u32);
    let r = BigRational::new(numer, denom);
    if neg {
        -r
    } else {
        r
    }
}

/// Evaluates a single number or one binary operation over two numbers.
/// Returns `None` when `s` is not numeric.
pub fn evaluate(s: &str) -> Option<Result<BigRational, NormalizeError>> {
    let caps = EXPR.captures(s)?;
    let a = parse_decimal(&caps[1]);
    let Some(op) = caps.get(2) else {
        return Some(Ok(a));
    };
    let b = parse_decimal(&caps[3]);
    let r = match op.as_str() {
        "+" => a + b,
        "-" => a - b,
        "*" => a * b,
        _ => {
            if b.is_zero() {
                return Some(Err(NormalizeError::DivisionByZero(s.to_string())));
            }
            a / b
        }
    };
    Some(Ok(r))
}

/// Shortest exact rendering: a terminating decimal when the reduced
/// denominator has no prime factor besides 2 and 5, `p/q` otherwise.
pub fn format_rational(r: &BigRational) -> String {
    let numer = r.numer().clone();
    let denom = r.denom().clone();
    let mut rest = denom.clone();
    let (two, five) = (BigInt::from(2u32), BigInt::from(5u32));
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{numer}/{denom}");
    }
    let places = twos.max(fives);
    let scaled = numer * (BigInt::from(10u32).pow(places) / &denom);
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let places = places as usize;
    let (int, frac) = if digits.len() > places {
        let (i, f) = digits.split_at(digits.len() - places);
        (i.to_string(), f.to_string())
    } else {
        ("0".to_string(), format!("{digits:0>places$}"))
    };
    let frac = frac.trim_end_matches('0');
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    out
}

/// Trims, case-folds and evaluates numeric answers to a canonical string.
pub fn normalize_answer(raw: &str) -> Result<String, NormalizeError> {
    let s = raw.trim().to_lowercase();
    match evaluate(&s) {
        Some(r) => Ok(format_rational(&r?)),
        None => Ok(s),
    }
}

/// Equality under normalisation; a failed normalisation is a non-match.
pub fn answers_match(a: &str, b: &str) -> bool {
    match (normalize_answer(a), normalize_answer(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Approximate value of a numeric answer.
pub fn numeric_value(raw: &str) -> Option<f64> {
    evaluate(raw.trim())?.ok()?.to_f64()
}
