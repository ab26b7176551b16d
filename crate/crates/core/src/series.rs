// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series container, block partitions and running segment statistics.
//!
//! Indices exposed by this module are 1-based (`1..=n`), so they line up
//! with row numbers of an input file. Slices handed out for computation are
//! ordinary zero-based Rust ranges.

use std::ops::{Deref, Range, RangeInclusive};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An ordered, finite sequence of observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TimeSeries<T> {
    values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    /// Wraps `values`, rejecting empty input and any NaN or infinity.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooShort { n: 0, min: 1 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i + 1 });
        }
        Ok(Self { values })
    }

    /// Caller guarantees every value is finite.
    pub(crate) fn from_vec_unchecked(values: Vec<T>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn mean(&self) -> T {
        mean(&self.values)
    }

    /// `c * x + d`, elementwise.
    pub fn affine(&self, c: T, d: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| c * v + d).collect())
    }

    pub(crate) fn require_len(&self, min: usize) -> Result<()> {
        if self.values.len() < min {
            Err(Error::TooShort {
                n: self.values.len(),
                min,
            })
        } else {
            Ok(())
        }
    }
}

impl<T> Deref for TimeSeries<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.values
    }
}

impl<T> AsRef<[T]> for TimeSeries<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Non-overlapping blocks `I_j = {(j-1)k+1, ..., jk}` for `j = 1..=l`.
/// Indices past `l * k` are not covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockPartition {
    pub n: usize,
    pub k_n: usize,
    pub l_n: usize,
}

impl BlockPartition {
    /// 1-based inclusive index range of block `j` (1-based).
    pub fn block(&self, j: usize) -> RangeInclusive<usize> {
        assert!(
            (1..=self.l_n).contains(&j),
            "block {j} outside 1..={}",
            self.l_n
        );
        (j - 1) * self.k_n + 1..=j * self.k_n
    }

    pub fn blocks(&self) -> impl Iterator<Item = RangeInclusive<usize>> + '_ {
        (1..=self.l_n).map(move |j| self.block(j))
    }

    /// Zero-based slice range of block `j` (1-based).
    pub fn span(&self, j: usize) -> Range<usize> {
        let r = self.block(j);
        *r.start() - 1..*r.end()
    }

    /// Number of observations inside blocks, `l_n * k_n`.
    pub fn covered(&self) -> usize {
        self.l_n * self.k_n
    }
}

/// Splits `1..=n` into `floor(n / k)` blocks of length `k`, discarding the tail.
pub fn partition(n: usize, k: usize) -> Result<BlockPartition> {
    if k < 1 {
        return Err(Error::invalid("block length k_n must be at least 1"));
    }
    let l = n / k;
    if l < 2 {
        return Err(Error::InsufficientBlocks { n, k });
    }
    Ok(BlockPartition { n, k_n: k, l_n: l })
}

/// Count, mean and centered sum of squares of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentStats<T> {
    pub count: usize,
    pub mean: T,
    pub css: T,
}

impl<T: Real> SegmentStats<T> {
    pub fn empty() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            css: T::zero(),
        }
    }

    /// Welford update.
    #[inline]
    pub fn push(&mut self, x: T) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::of_usize(self.count);
        self.css = self.css + delta * (x - self.mean);
    }

    pub fn from_slice(xs: &[T]) -> Self {
        let mut s = Self::empty();
        for &x in xs {
            s.push(x);
        }
        s
    }
}

/// Statistics of `x` over the 1-based inclusive `range`.
pub fn segment_stats<T: Real>(
    x: &TimeSeries<T>,
    range: RangeInclusive<usize>,
) -> Result<SegmentStats<T>> {
    let (first, last) = (*range.start(), *range.end());
    if first < 1 || first > last || last > x.len() {
        return Err(Error::InvalidRange {
            first,
            last,
            n: x.len(),
        });
    }
    Ok(SegmentStats::from_slice(&x[first - 1..last]))
}

/// Prefix statistics over `1..=j` and suffix statistics over `j+1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitPoint<T> {
    pub j: usize,
    pub prefix: SegmentStats<T>,
    /// `None` for `j = n`, where the suffix is empty.
    pub suffix: Option<SegmentStats<T>>,
}

/// Prefix and suffix mean / centered sum of squares at every split `j = 1..=n`,
/// in O(n) via forward and backward Welford passes.
pub fn prefix_suffix_scan<T: Real>(x: &TimeSeries<T>) -> Result<Vec<SplitPoint<T>>> {
    x.require_len(2)?;
    Ok(split_scan(x))
}

pub(crate) fn split_scan<T: Real>(xs: &[T]) -> Vec<SplitPoint<T>> {
    let n = xs.len();
    let mut suffix = vec![SegmentStats::empty(); n + 1];
    let mut acc = SegmentStats::empty();
    for i in (0..n).rev() {
        acc.push(xs[i]);
        // suffix[i] covers zero-based i..n, i.e. 1-based i+1..=n
        suffix[i] = acc;
    }
    let mut prefix = SegmentStats::empty();
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        prefix.push(xs[j - 1]);
        out.push(SplitPoint {
            j,
            prefix,
            suffix: if j < n { Some(suffix[j]) } else { None },
        });
    }
    out
}

pub(crate) fn mean<T: Real>(xs: &[T]) -> T {
    let n = T::of_usize(xs.len());
    let first = xs.iter().copied().sum::<T>() / n;
    // one refinement pass
    first + xs.iter().map(|&v| v - first).sum::<T>() / n
}

/// Two-pass centered sum of squares.
pub(crate) fn css<T: Real>(xs: &[T]) -> T {
    let m = mean(xs);
    xs.iter().map(|&v| (v - m) * (v - m)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries<f64> {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-300
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            TimeSeries::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 2 })
        );
        assert!(TimeSeries::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn partition_discards_remainder() {
        let p = partition(10, 3).unwrap();
        let blocks: Vec<_> = p.blocks().collect();
        assert_eq!(blocks, vec![1..=3, 4..=6, 7..=9]);
        assert_eq!(p.covered(), 9);
        assert_eq!(p.span(2), 3..6);
    }

    #[test]
    fn partition_exact() {
        let p = partition(6, 3).unwrap();
        assert_eq!(p.blocks().collect::<Vec<_>>(), vec![1..=3, 4..=6]);
    }

    #[test]
    fn partition_errors() {
        assert_eq!(
            partition(5, 6),
            Err(Error::InsufficientBlocks { n: 5, k: 6 })
        );
        assert_eq!(
            partition(5, 3),
            Err(Error::InsufficientBlocks { n: 5, k: 3 })
        );
        assert!(matches!(partition(5, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn segment_examples() {
        let s = segment_stats(&ts(&[0.0, 2.0]), 1..=2).unwrap();
        assert_eq!((s.count, s.mean, s.css), (2, 1.0, 2.0));
        let s = segment_stats(&ts(&[5.0, 5.0, 5.0]), 1..=3).unwrap();
        assert_eq!((s.mean, s.css), (5.0, 0.0));
        let s = segment_stats(&ts(&[1.0, 2.0, 3.0]), 1..=3).unwrap();
        assert_eq!((s.mean, s.css), (2.0, 2.0));
    }

    #[test]
    fn segment_range_errors() {
        let x = ts(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            segment_stats(&x, 0..=2),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            segment_stats(&x, 2..=4),
            Err(Error::InvalidRange { .. })
        ));
        #[allow(clippy::reversed_empty_ranges)]
        let r = segment_stats(&x, 3..=2);
        assert!(matches!(r, Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn scan_examples() {
        let s = prefix_suffix_scan(&ts(&[0.0, 2.0, 1.0, 3.0])).unwrap();
        let p = s[1];
        assert_eq!(p.j, 2);
        assert_eq!((p.prefix.mean, p.prefix.css), (1.0, 2.0));
        let suf = p.suffix.unwrap();
        assert_eq!((suf.mean, suf.css), (2.0, 2.0));
        assert!(s[3].suffix.is_none());

        let s = prefix_suffix_scan(&ts(&[0.0, 2.0])).unwrap();
        assert_eq!((s[0].prefix.mean, s[0].prefix.css), (0.0, 0.0));
        assert_eq!(
            (s[0].suffix.unwrap().mean, s[0].suffix.unwrap().css),
            (2.0, 0.0)
        );

        let s = prefix_suffix_scan(&ts(&[4.0; 7])).unwrap();
        for p in &s {
            assert_eq!(p.prefix.css, 0.0);
            assert_eq!(p.suffix.map_or(0.0, |q| q.css), 0.0);
        }
    }

    #[test]
    fn scan_matches_segment_stats_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let n = rng.random_range(2..60);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let x = ts(&x);
            let j = rng.random_range(1..n);
            let scan = prefix_suffix_scan(&x).unwrap();
            let pre = segment_stats(&x, 1..=j).unwrap();
            let suf = segment_stats(&x, j + 1..=n).unwrap();
            let two_pass_pre = css(&x[..j]);
            let p = scan[j - 1];
            // means are compared on the scale of the data
            let close_mean = |a: f64, b: f64| (a - b).abs() <= 1e-12 * 50.0;
            assert!(close_mean(p.prefix.mean, pre.mean));
            assert!(rel_close(p.prefix.css, pre.css, 1e-12));
            assert!(rel_close(p.prefix.css, two_pass_pre, 1e-10));
            let q = p.suffix.unwrap();
            assert!(close_mean(q.mean, suf.mean));
            assert!(rel_close(q.css, suf.css, 1e-12));
        }
    }

    #[test]
    fn f32_scan() {
        let x = TimeSeries::new(vec![0.0f32, 2.0, 1.0, 3.0]).unwrap();
        let s = prefix_suffix_scan(&x).unwrap();
        assert_eq!(s[1].prefix.css, 2.0f32);
    }

    proptest! {
        #[test]
        fn pooling_identity(x in proptest::collection::vec(-1e3f64..1e3, 2..80), jf in 0.0f64..1.0) {
            let n = x.len();
            let j = 1 + ((n - 1) as f64 * jf) as usize;
            let j = j.min(n - 1);
            let s = ts(&x);
            let scan = prefix_suffix_scan(&s).unwrap();
            let p = scan[j - 1];
            let q = p.suffix.unwrap();
            let total = css(&x);
            let d = p.prefix.mean - q.mean;
            let pooled = p.prefix.css + q.css + (j * (n - j)) as f64 / n as f64 * d * d;
            prop_assert!((pooled - total).abs() <= 1e-10 * total.max(1e-8));
        }

        #[test]
        fn shift_and_scale(x in proptest::collection::vec(-10f64..10.0, 2..40), c in 0.1f64..5.0, d in -100f64..100.0) {
            let base = SegmentStats::from_slice(&x);
            let shifted: Vec<f64> = x.iter().map(|v| v + d).collect();
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let s1 = SegmentStats::from_slice(&shifted);
            let s2 = SegmentStats::from_slice(&scaled);
            let tol = 1e-9 * (1.0 + base.css);
            prop_assert!((s1.css - base.css).abs() <= tol);
            prop_assert!((s2.css - c * c * base.css).abs() <= tol * c * c);
        }
    }
}
