//! Exact rational numbers for the ontology layer.
//!
//! Attribute values and aggregate thresholds are exact rationals so that
//! aggregate-concept membership is decidable without rounding. The stream
//! engine deliberately uses `f64` instead; conversion happens at the
//! boundary between the two layers.

use alloc::string::{String, ToString};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

/// Parses a decimal literal (e.g. `-3`, `0.95`, `12.5`) into an exact rational.
///
/// Plain `a/b` fractions are accepted too since they show up naturally when
/// rationals are printed and re-read.
pub fn parse_rational(text: &str) -> Result<Rational, RationalParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalParseError::empty(text));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| RationalParseError::bad(text))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| RationalParseError::bad(text))?;
        if d.is_zero() {
            return Err(RationalParseError::bad(text));
        }
        return Ok(Rational::new(n, d));
    }
    let (sign, digits) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(RationalParseError::bad(text));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(RationalParseError::bad(text));
    }
    let mut numer: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().map_err(|_| RationalParseError::bad(text))?
    };
    let mut denom = BigInt::one();
    for c in frac_part.chars() {
        numer = numer * 10 + (c as u8 - b'0');
        denom *= 10;
    }
    Ok(Rational::new(numer * sign, denom))
}

/// Renders a rational as a decimal when the denominator is a power of ten
/// times a power of two/five fit, otherwise as `a/b`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    // Try a short exact decimal expansion (denominator 2^a * 5^b).
    let mut den = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if den.is_one() && twos <= 18 && fives <= 18 {
        let shift = twos.max(fives);
        let scale = BigInt::from(10).pow(shift);
        let scaled = r.numer() * &scale / r.denom();
        let neg = scaled.is_negative();
        let digits = scaled.abs().to_string();
        let digits = if digits.len() <= shift as usize {
            let mut padded = String::new();
            for _ in 0..(shift as usize + 1 - digits.len()) {
                padded.push('0');
            }
            padded + &digits
        } else {
            digits
        };
        let split = digits.len() - shift as usize;
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&digits[..split]);
        out.push('.');
        out.push_str(&digits[split..]);
        return out;
    }
    let mut out = r.numer().to_string();
    out.push('/');
    out.push_str(&r.denom().to_string());
    out
}

/// Lossy conversion for handing ontology-layer thresholds to the f64 stream
/// engine.
pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalParseError {
    pub input: String,
}

impl RationalParseError {
    fn bad(text: &str) -> Self {
        RationalParseError { input: text.to_string() }
    }
    fn empty(text: &str) -> Self {
        RationalParseError { input: text.to_string() }
    }
}

impl core::fmt::Display for RationalParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "not a decimal rational: `{}`", self.input)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RationalParseError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.9").unwrap(), Rational::new(9.into(), 10.into()));
        assert_eq!(parse_rational("-1.25").unwrap(), Rational::new((-5).into(), 4.into()));
        assert_eq!(parse_rational("42").unwrap(), Rational::from_integer(42.into()));
        assert_eq!(parse_rational("3/4").unwrap(), Rational::new(3.into(), 4.into()));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1.into(), 2.into()));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn formats_round_trip() {
        for s in ["0.9", "-1.25", "42", "0.0625"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
        }
        let third = Rational::new(1.into(), 3.into());
        assert_eq!(format_rational(&third), "1/3");
    }
}
