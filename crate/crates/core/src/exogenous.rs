//! Uniform streams carved out of a single digit sequence by the diagonal method,
//! plus inverse-CDF sampling.

use crate::error::{invalid, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Where digits come from. Every variant is a pure function of the position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DigitSource {
    /// Counter-based pseudo-random digits keyed by a seed.
    Counter { seed: u64 },
    /// Digits of 0.123456789101112... written in the stream's base.
    Champernowne,
    /// Every digit equals the given value (must be < base).
    Constant(u32),
}

/// An unbounded digit sequence D_1, D_2, ... in a fixed base.
#[derive(Clone)]
pub struct DigitStream {
    source: DigitSource,
    base: u32,
    rng: Option<ChaCha8Rng>,
}

impl fmt::Debug for DigitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DigitStream")
            .field("source", &self.source)
            .field("base", &self.base)
            .finish()
    }
}

impl DigitStream {
    pub fn new(source: DigitSource, base: u32) -> Result<Self> {
        if base < 2 {
            return invalid(format!("base must be at least 2, got {base}"));
        }
        if let DigitSource::Constant(d) = source {
            if d >= base {
                return invalid(format!("constant digit {d} not below base {base}"));
            }
        }
        let rng = match source {
            DigitSource::Counter { seed } => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(base as u64);
                Some(r)
            }
            _ => None,
        };
        Ok(DigitStream { source, base, rng })
    }

    /// Seeded pseudo-random decimal digits.
    pub fn seeded(seed: u64) -> Self {
        Self::new(DigitSource::Counter { seed }, 10).expect("base 10 is valid")
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn source(&self) -> &DigitSource {
        &self.source
    }

    /// Digit at 1-based position `n`.
    pub fn digit(&self, n: u64) -> u32 {
        assert!(n >= 1, "digit positions start at 1");
        match &self.source {
            DigitSource::Constant(d) => *d,
            DigitSource::Champernowne => champernowne_digit(n, self.base),
            DigitSource::Counter { .. } => {
                let mut r = self.rng.clone().expect("counter source has a generator");
                r.set_word_pos(2 * (n as u128 - 1));
                let w = r.next_u64();
                ((w as u128 * self.base as u128) >> 64) as u32
            }
        }
    }
}

fn champernowne_digit(n: u64, base: u32) -> u32 {
    let b = base as u128;
    let mut rem = (n - 1) as u128;
    let mut len: u128 = 1;
    let mut count = b - 1;
    let mut start: u128 = 1;
    while rem >= len * count {
        rem -= len * count;
        len += 1;
        count *= b;
        start *= b;
    }
    let mut num = start + rem / len;
    let from_right = len - 1 - rem % len;
    for _ in 0..from_right {
        num /= b;
    }
    (num % b) as u32
}

/// Position of column `j` in diagonal row `i` (both 1-based).
pub fn diagonal_position(row: u64, col: u64) -> u64 {
    let d = row + col - 1;
    d * (d - 1) / 2 + col
}

/// The first `len` digit positions belonging to row `row`.
pub fn row_positions(row: u64, len: usize) -> Vec<u64> {
    (1..=len as u64).map(|j| diagonal_position(row, j)).collect()
}

/// A stream of uniforms reading the digits of one diagonal row.
#[derive(Clone, Debug)]
pub struct UniformStream {
    source: DigitStream,
    row: u64,
    precision: u32,
    cursor: u64,
}

pub const DEFAULT_PRECISION: u32 = 16;

impl UniformStream {
    pub fn new(source: DigitStream, row: u64, precision: u32) -> Result<Self> {
        if row == 0 {
            return invalid("diagonal rows are numbered from 1");
        }
        if precision == 0 {
            return invalid("precision must be positive");
        }
        Ok(UniformStream { source, row, precision, cursor: 0 })
    }

    pub fn row(&self) -> u64 {
        self.row
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Number of digits consumed so far.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Positions the next draw will read.
    pub fn next_positions(&self) -> Vec<u64> {
        (1..=self.precision as u64)
            .map(|m| diagonal_position(self.row, self.cursor + m))
            .collect()
    }

    pub fn next_uniform(&mut self) -> f64 {
        let base = self.source.base() as f64;
        let digits: Vec<u32> = self
            .next_positions()
            .into_iter()
            .map(|p| self.source.digit(p))
            .collect();
        self.cursor += self.precision as u64;
        let mut v = 0.0;
        for d in digits.iter().rev() {
            v = (v + *d as f64) / base;
        }
        if v >= 1.0 {
            v = f64::from_bits(1.0f64.to_bits() - 1);
        }
        v
    }
}

/// Split a digit source into `k` streams, stream j reading diagonal row j.
pub fn split_streams(source: &DigitStream, k: usize) -> Result<Vec<UniformStream>> {
    split_streams_with_precision(source, k, DEFAULT_PRECISION)
}

pub fn split_streams_with_precision(
    source: &DigitStream,
    k: usize,
    precision: u32,
) -> Result<Vec<UniformStream>> {
    if k == 0 {
        return invalid("need at least one stream");
    }
    (1..=k as u64)
        .map(|row| UniformStream::new(source.clone(), row, precision))
        .collect()
}

/// Draw from a finite distribution given as (value, F(value)) pairs in support order:
/// returns min{x : F(x) >= u}.
pub fn inverse_cdf_sample<V: Clone>(cdf: &[(V, f64)], u: f64) -> Result<V> {
    validate_cdf(cdf)?;
    if !(0.0..1.0).contains(&u) {
        return invalid(format!("uniform draw {u} outside [0,1)"));
    }
    for (v, f) in cdf {
        if *f >= u {
            return Ok(v.clone());
        }
    }
    Ok(cdf[cdf.len() - 1].0.clone())
}

fn validate_cdf<V>(cdf: &[(V, f64)]) -> Result<()> {
    if cdf.is_empty() {
        return invalid("empty cdf");
    }
    let mut prev = 0.0;
    for (i, (_, f)) in cdf.iter().enumerate() {
        if !f.is_finite() || *f < 0.0 {
            return invalid(format!("cdf threshold {i} is not a probability"));
        }
        if *f < prev {
            return invalid(format!("cdf thresholds decrease at index {i}"));
        }
        prev = *f;
    }
    if (prev - 1.0).abs() > 1e-9 {
        return invalid(format!("final cdf threshold is {prev}, expected 1"));
    }
    Ok(())
}

/// Index drawn from a probability vector by inverse CDF; zero-mass atoms are never chosen.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if acc > u {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_rows_match_array() {
        assert_eq!(row_positions(1, 7), vec![1, 3, 6, 10, 15, 21, 28]);
        assert_eq!(row_positions(2, 6), vec![2, 5, 9, 14, 20, 27]);
        assert_eq!(row_positions(3, 5), vec![4, 8, 13, 19, 26]);
    }

    #[test]
    fn champernowne_digits() {
        let s = DigitStream::new(DigitSource::Champernowne, 10).unwrap();
        let got: Vec<u32> = (1..=15).map(|n| s.digit(n)).collect();
        assert_eq!(got, vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 1, 0, 1, 1, 1, 2]);
        // 190th digit starts "100"
        assert_eq!((190..=192).map(|n| s.digit(n)).collect::<Vec<_>>(), vec![1, 0, 0]);
    }

    #[test]
    fn three_digit_draws_from_champernowne() {
        let s = DigitStream::new(DigitSource::Champernowne, 10).unwrap();
        let mut streams = split_streams_with_precision(&s, 3, 3).unwrap();
        let u: Vec<f64> = streams.iter_mut().map(|x| x.next_uniform()).collect();
        assert!((u[0] - 0.136).abs() < 1e-12);
        assert!((u[1] - 0.259).abs() < 1e-12);
        assert!((u[2] - 0.481).abs() < 1e-12);
    }

    #[test]
    fn zero_source_gives_zero() {
        let s = DigitStream::new(DigitSource::Constant(0), 10).unwrap();
        let mut st = split_streams(&s, 1).unwrap().remove(0);
        assert_eq!(st.next_uniform(), 0.0);
        assert_eq!(st.row(), 1);
    }

    #[test]
    fn all_nines_stay_below_one() {
        let s = DigitStream::new(DigitSource::Constant(9), 10).unwrap();
        let mut st = UniformStream::new(s, 1, 20).unwrap();
        assert!(st.next_uniform() < 1.0);
    }

    #[test]
    fn successive_draws_use_later_positions() {
        let s = DigitStream::seeded(3);
        let mut st = UniformStream::new(s, 2, 4).unwrap();
        let a = st.next_positions();
        st.next_uniform();
        let b = st.next_positions();
        assert!(a.last().unwrap() < b.first().unwrap());
        assert_eq!(st.cursor(), 4);
    }

    #[test]
    fn zero_streams_rejected() {
        assert!(split_streams(&DigitStream::seeded(1), 0).is_err());
    }

    #[test]
    fn bad_base_rejected() {
        assert!(DigitStream::new(DigitSource::Champernowne, 1).is_err());
        assert!(DigitStream::new(DigitSource::Constant(10), 10).is_err());
    }

    #[test]
    fn inverse_cdf_examples() {
        let bern = [(0, 0.7), (1, 1.0)];
        assert_eq!(inverse_cdf_sample(&bern, 0.5).unwrap(), 0);
        assert_eq!(inverse_cdf_sample(&bern, 0.8).unwrap(), 1);
        let unif = [(0, 1.0 / 3.0), (1, 2.0 / 3.0), (2, 1.0)];
        assert_eq!(inverse_cdf_sample(&unif, 0.34).unwrap(), 1);
        let point = [("v", 1.0)];
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(inverse_cdf_sample(&point, u).unwrap(), "v");
        }
        assert!(inverse_cdf_sample(&[(0, 0.6), (1, 0.4)], 0.5).is_err());
    }

    #[test]
    fn sample_index_skips_empty_atoms() {
        assert_eq!(sample_index(&[0.0, 0.5, 0.5], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.0, 0.5], 0.5), 2);
    }

    #[test]
    fn seeded_digits_are_reproducible_and_in_range() {
        let a = DigitStream::seeded(42);
        let b = DigitStream::seeded(42);
        for n in 1..200 {
            assert_eq!(a.digit(n), b.digit(n));
            assert!(a.digit(n) < 10);
        }
        let c = DigitStream::seeded(43);
        assert!((1..200).any(|n| a.digit(n) != c.digit(n)));
    }
}
