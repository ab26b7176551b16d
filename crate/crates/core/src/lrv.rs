// SPDX-License-Identifier: MIT OR Apache-2.0

//! Long-run variance estimation from non-overlapping blocks.
//!
//! The self-normalized estimator divides each centered block sum by the
//! block's own root centered sum of squares, so unknown time-varying scale
//! cancels block by block and only the dependence factor `tau^2` remains.
//! The stationary estimator skips that normalization and is kept as a
//! comparator.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::scalar::Real;
use crate::series::{self, partition, SegmentStats, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LrvMethod {
    SelfNormalized,
    Stationary,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRunEstimate<T> {
    pub tau_sq_hat: T,
    pub k_n: usize,
    pub l_n: usize,
    pub d_values: Vec<T>,
    pub method: LrvMethod,
}

impl<T: Real> LongRunEstimate<T> {
    pub fn tau_hat(&self) -> T {
        self.tau_sq_hat.sqrt()
    }

    pub(crate) fn from_d(d_values: Vec<T>, k_n: usize, method: LrvMethod) -> Self {
        let l_n = d_values.len();
        let tau_sq_hat = d_values.iter().map(|&d| d * d).sum::<T>() / T::of_usize(l_n);
        Self {
            tau_sq_hat,
            k_n,
            l_n,
            d_values,
            method,
        }
    }
}

/// Self-normalized blockwise estimate: `D_j = k (mean_j - mean) / V(j)`,
/// `tau^2 = mean(D_j^2)`, with `mean` taken over all `n` observations.
pub fn lrv_selfnorm<T: Real>(x: &TimeSeries<T>, k_n: usize) -> Result<LongRunEstimate<T>> {
    selfnorm_slice(x, k_n)
}

/// Non-normalized comparator `D_j = sqrt(k) (mean_j - mean)`.
pub fn lrv_stationary<T: Real>(x: &TimeSeries<T>, k_n: usize) -> Result<LongRunEstimate<T>> {
    stationary_slice(x, k_n)
}

pub(crate) fn selfnorm_slice<T: Real>(xs: &[T], k_n: usize) -> Result<LongRunEstimate<T>> {
    let p = partition(xs.len(), k_n)?;
    let grand = series::mean(xs);
    let k = T::of_usize(k_n);
    let mut d = Vec::with_capacity(p.l_n);
    for j in 1..=p.l_n {
        let s = SegmentStats::from_slice(&xs[p.span(j)]);
        if s.css <= T::zero() {
            return Err(Error::DegenerateBlock { block: j });
        }
        d.push(k * (s.mean - grand) / s.css.sqrt());
    }
    Ok(LongRunEstimate::from_d(d, k_n, LrvMethod::SelfNormalized))
}

/// Allocation-free `tau^2` for the bootstrap inner loops.
pub(crate) fn selfnorm_tau_sq<T: Real>(xs: &[T], k_n: usize) -> Result<T> {
    let p = partition(xs.len(), k_n)?;
    let grand = series::mean(xs);
    let k = T::of_usize(k_n);
    let mut acc = T::zero();
    for j in 1..=p.l_n {
        let s = SegmentStats::from_slice(&xs[p.span(j)]);
        if s.css <= T::zero() {
            return Err(Error::DegenerateBlock { block: j });
        }
        let d = k * (s.mean - grand);
        acc = acc + d * d / s.css;
    }
    Ok(acc / T::of_usize(p.l_n))
}

pub(crate) fn stationary_slice<T: Real>(xs: &[T], k_n: usize) -> Result<LongRunEstimate<T>> {
    let p = partition(xs.len(), k_n)?;
    let grand = series::mean(xs);
    let root_k = T::of_usize(k_n).sqrt();
    let d = (1..=p.l_n)
        .map(|j| root_k * (series::mean(&xs[p.span(j)]) - grand))
        .collect();
    Ok(LongRunEstimate::from_d(d, k_n, LrvMethod::Stationary))
}

pub(crate) fn stationary_tau_sq<T: Real>(xs: &[T], k_n: usize) -> Result<T> {
    Ok(stationary_slice(xs, k_n)?.tau_sq_hat)
}

/// One row of the block-length search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub k: usize,
    /// `None` when `k` leaves fewer than two blocks.
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockLengthSelection {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub k_star: usize,
    pub table: Vec<MseRow>,
}

/// Default search grid: `4..=n/4`, keeping only `k` with at least four blocks.
pub fn default_k_grid(n: usize) -> Vec<usize> {
    (4..=n / 4).filter(|k| n / k >= 4).collect()
}

pub const DEFAULT_SELECT_REPS: usize = 2000;

/// Picks the block length minimizing the simulated `E(tau_hat - 1)^2` for
/// i.i.d. standard normal data of length `n`.
///
/// Every replicate series is shared by all candidate `k` (common random
/// numbers), which keeps the argmin stable at moderate `reps`. Ties go to
/// the smaller `k`.
pub fn select_block_length(
    n: usize,
    k_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<BlockLengthSelection> {
    if k_grid.is_empty() {
        return Err(Error::invalid("empty block-length grid"));
    }
    if reps < 1 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let feasible: Vec<usize> = k_grid
        .iter()
        .copied()
        .filter(|&k| k >= 1 && n / k >= 2)
        .collect();
    if feasible.is_empty() {
        return Err(Error::InsufficientBlocks {
            n,
            k: *k_grid.iter().min().unwrap_or(&0),
        });
    }

    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, tag::SELECT_K, r as u64);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
            feasible
                .iter()
                .map(|&k| match selfnorm_tau_sq(&z, k) {
                    Ok(t2) => (t2.sqrt() - 1.0).powi(2),
                    Err(_) => f64::NAN,
                })
                .collect()
        })
        .collect();

    let mut table = Vec::with_capacity(k_grid.len());
    let mut best: Option<(usize, f64)> = None;
    for &k in k_grid {
        match feasible.iter().position(|&f| f == k) {
            None => table.push(MseRow {
                k,
                mse: None,
                note: Some(format!("fewer than two blocks for n = {n}")),
            }),
            Some(col) => {
                let vals: Vec<f64> = per_rep
                    .iter()
                    .map(|row| row[col])
                    .filter(|v| v.is_finite())
                    .collect();
                if vals.is_empty() {
                    table.push(MseRow {
                        k,
                        mse: None,
                        note: Some("every replicate degenerate".into()),
                    });
                    continue;
                }
                let mse = vals.iter().sum::<f64>() / vals.len() as f64;
                let better = match best {
                    None => true,
                    Some((bk, bm)) => mse < bm || (mse == bm && k < bk),
                };
                if better {
                    best = Some((k, mse));
                }
                table.push(MseRow {
                    k,
                    mse: Some(mse),
                    note: None,
                });
            }
        }
    }
    let (k_star, _) = best.ok_or_else(|| Error::Degenerate("no feasible block length".into()))?;
    Ok(BlockLengthSelection {
        n,
        reps,
        seed,
        k_star,
        table,
    })
}
