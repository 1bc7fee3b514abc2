//! Exact-or-floating scalar values.
//!
//! Distances, thresholds and deadline sums flow through [`Scalar`] so the
//! discrete families stay in exact `BigRational` arithmetic end to end while
//! the two continuous families work in `f64`. Exact and real values never mix
//! silently: promotion happens only through explicit arithmetic on a pair, and
//! the evaluation entry points reject real inputs outright.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    Real(f64),
}

impl Scalar {
    pub fn from_int(v: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    /// Exact ratio `numer/denom`. Panics on a zero denominator.
    pub fn from_ratio(numer: i64, denom: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Scalar::Exact(r)
    }

    /// Wraps a float, rejecting NaN and infinities at the door.
    pub fn real(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite scalar: {v}");
        Scalar::Real(v)
    }

    pub fn exact_zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    /// Zero of the same kind (exact or real) as `self`.
    pub fn zero_like(&self) -> Self {
        match self {
            Scalar::Exact(_) => Scalar::exact_zero(),
            Scalar::Real(_) => Scalar::Real(0.0),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Real(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => r.to_f64().unwrap_or(f64::INFINITY),
            Scalar::Real(v) => *v,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_negative(),
            Scalar::Real(v) => *v < 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Real(v) => *v == 0.0,
        }
    }

    pub fn add(&self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            (a, b) => Scalar::Real(a.to_f64() + b.to_f64()),
        }
    }

    /// Multiplication by a nonnegative integer, exactness-preserving.
    pub fn mul_nat(&self, k: u64) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r * BigRational::from_integer(BigInt::from(k))),
            Scalar::Real(v) => Scalar::Real(v * k as f64),
        }
    }

    /// Total order: exact pairs compare exactly, anything else through f64.
    /// Both sides are finite by construction, so the order really is total.
    pub fn total_cmp(&self, rhs: &Scalar) -> Ordering {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            (a, b) => a
                .to_f64()
                .partial_cmp(&b.to_f64())
                .expect("scalars are finite"),
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_float17(v: f64) -> String {
    format!("{v:.16e}")
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Scalar::Real(v) => f.write_str(&fmt_float17(*v)),
        }
    }
}

impl FromStr for Scalar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let numer =
                BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator {n:?}: {e}"))?;
            let denom =
                BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator {d:?}: {e}"))?;
            if denom.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            return Ok(Scalar::Exact(BigRational::new(numer, denom)));
        }
        if let Ok(i) = BigInt::from_str(s) {
            return Ok(Scalar::Exact(BigRational::from_integer(i)));
        }
        let v: f64 = s
            .parse()
            .map_err(|e| format!("not a rational or float: {s:?} ({e})"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value: {s:?}"));
        }
        Ok(Scalar::Real(v))
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// `base^exp` with the convention `0^0 = 1`.
pub fn rat_pow(base: &BigRational, exp: usize) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(1));
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn parses_rationals_integers_and_floats() {
        assert_eq!(
            "1/2".parse::<Scalar>().unwrap().as_exact().unwrap(),
            &rat(1, 2)
        );
        assert_eq!(
            "-3".parse::<Scalar>().unwrap().as_exact().unwrap(),
            &rat(-3, 1)
        );
        assert_eq!(
            " 6/4 ".parse::<Scalar>().unwrap().as_exact().unwrap(),
            &rat(3, 2)
        );
        match "0.25".parse::<Scalar>().unwrap() {
            Scalar::Real(v) => assert_eq!(v, 0.25),
            other => panic!("expected real, got {other:?}"),
        }
        assert!("1/0".parse::<Scalar>().is_err());
        assert!("inf".parse::<Scalar>().is_err());
        assert!("nan".parse::<Scalar>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in ["0/1", "1/2", "-7/3", "5/1"] {
            let s: Scalar = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
        }
        let r = Scalar::real(0.1 + 0.2);
        let back: Scalar = r.to_string().parse().unwrap();
        assert_eq!(back.to_f64(), 0.1 + 0.2);
    }

    #[test]
    fn ordering_mixes_exact_and_real() {
        let half = Scalar::from_ratio(1, 2);
        let third = Scalar::from_ratio(1, 3);
        assert!(third < half);
        assert!(half == Scalar::from_ratio(2, 4));
        assert!(Scalar::real(0.4) < half);
        assert!(Scalar::real(0.5) == half);
    }

    #[test]
    fn arithmetic_preserves_exactness() {
        let t = Scalar::from_ratio(1, 2);
        let z = t.mul_nat(3).add(&Scalar::from_int(1));
        assert_eq!(z.as_exact().unwrap(), &rat(5, 2));
        assert!(t.add(&Scalar::real(0.5)).as_exact().is_none());
    }

    #[test]
    fn pow_and_factorial_conventions() {
        assert_eq!(rat_pow(&rat(0, 1), 0), rat(1, 1));
        assert_eq!(rat_pow(&rat(2, 3), 3), rat(8, 27));
        assert_eq!(factorial(0), BigInt::from(1));
        assert_eq!(factorial(5), BigInt::from(120));
    }

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(fmt_float17(0.25), "2.5000000000000000e-1");
        let v = 1.0 / 3.0;
        let parsed: f64 = fmt_float17(v).parse().unwrap();
        assert_eq!(parsed, v);
    }
}
