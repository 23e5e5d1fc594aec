//! Exact rationals and the `p/q` literal grammar shared by every file format.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{parse_err, Error, Result};

/// Exact rational scalar.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact conversion of a finite `f64` (every finite double is a dyadic rational).
pub fn from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::InvalidInput(format!("non-finite value {x}")))
}

/// Largest integer `<= x`.
pub fn floor_int(x: &Q) -> i64 {
    x.floor()
        .to_integer()
        .to_i64()
        .expect("coordinate out of i64 range")
}

pub fn is_integer(x: &Q) -> bool {
    x.is_integer()
}

/// Formats as `p/q` with `q > 0`; integers are written as `p/1`.
pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `p/q` (q > 0) or a bare integer `p`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n
        .parse()
        .map_err(|_| parse_err(0, format!("bad numerator in {s:?}")))?;
    let d: BigInt = d
        .parse()
        .map_err(|_| parse_err(0, format!("bad denominator in {s:?}")))?;
    if !d.is_positive() {
        return Err(parse_err(0, format!("denominator must be positive in {s:?}")));
    }
    Ok(Q::new(n, d))
}

/// Square root of a non-negative rational, as `f64`.
pub fn sqrt_f64(x: &Q) -> f64 {
    to_f64(x).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        for s in ["3/4", "-7/2", "0/1", "12/1"] {
            assert_eq!(format_q(&parse_q(s).unwrap()), s);
        }
        assert_eq!(parse_q("6/8").unwrap(), qr(3, 4));
        assert_eq!(parse_q("5").unwrap(), q(5));
    }

    #[test]
    fn rejects_bad_literals() {
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("1/-2").is_err());
        assert!(parse_q("a/2").is_err());
    }

    #[test]
    fn floor_of_negative() {
        assert_eq!(floor_int(&qr(-1, 3)), -1);
        assert_eq!(floor_int(&qr(7, 2)), 3);
    }
}
