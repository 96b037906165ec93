//! Number types usable as probabilities: binary floating point and exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Zero};
use std::fmt::Debug;

pub trait Prob: Clone + Debug + PartialOrd + Num {
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Below this a conditioning event counts as impossible.
    fn negligible(&self) -> bool;
}

pub const POSITIVITY_TOL: f64 = 1e-15;

impl Prob for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn negligible(&self) -> bool {
        self.abs() < POSITIVITY_TOL
    }
}

impl Prob for BigRational {
    /// Exact value of the shortest decimal that round-trips to `x`, so 0.2 becomes 1/5.
    fn from_f64(x: f64) -> Self {
        decimal_to_rational(&format!("{x}")).expect("finite float prints as a decimal")
    }
    fn to_f64(&self) -> f64 {
        let n: f64 = self.numer().to_string().parse().unwrap_or(f64::NAN);
        let d: f64 = self.denom().to_string().parse().unwrap_or(f64::NAN);
        n / d
    }
    fn negligible(&self) -> bool {
        self.is_zero()
    }
}

/// Parse a plain decimal literal ("-0.125", "3", "1.5") into an exact rational.
pub fn decimal_to_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((a, b)) => (a, b),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// `1 - p` computed on the decimal form of `p`, so 1 - 0.8 gives the float nearest 0.2.
pub fn decimal_complement(p: f64) -> f64 {
    match decimal_to_rational(&format!("{p}")) {
        Some(r) => (BigRational::from_integer(BigInt::from(1)) - r).to_f64(),
        None => 1.0 - p,
    }
}

pub(crate) fn abs_diff<P: Prob>(a: &P, b: &P) -> f64 {
    (a.clone() - b.clone()).to_f64().abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        let r = BigRational::from_f64(0.2);
        assert_eq!(r, BigRational::new(BigInt::from(1), BigInt::from(5)));
        let s = BigRational::from_f64(0.7) + BigRational::from_f64(0.3);
        assert_eq!(s, BigRational::from_integer(BigInt::from(1)));
        assert_eq!(decimal_to_rational("-1.25").unwrap().to_f64(), -1.25);
        assert!(decimal_to_rational("1e5").is_none());
    }
}
