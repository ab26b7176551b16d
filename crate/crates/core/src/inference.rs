// SPDX-License-Identifier: MIT OR Apache-2.0

//! Confidence intervals for the mean.
//!
//! * `SN`: `mean +- z * tau_hat * V_n / n`, where `V_n^2` is the centered sum
//!   of squares of the whole series.
//! * `WB`: wild bootstrap of the pivot `n (mean - mu) / (tau V_n)`.
//! * `ST`, `BB`, `SBB`: stationarity-based comparators (normal theory,
//!   non-overlapping block bootstrap, studentized block bootstrap).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lrv;
use crate::normal;
use crate::rng::{self, tag, StreamRng};
use crate::scalar::Real;
use crate::series::{self, partition, TimeSeries};

pub const DEFAULT_BOOTSTRAP: usize = 1000;
/// Total draws allowed per requested replicate before giving up.
pub const REDRAW_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CiMethod {
    SN,
    WB,
    ST,
    BB,
    SBB,
}

impl CiMethod {
    pub const ALL: [CiMethod; 5] = [
        CiMethod::SN,
        CiMethod::WB,
        CiMethod::ST,
        CiMethod::BB,
        CiMethod::SBB,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CiMethod::SN => "SN",
            CiMethod::WB => "WB",
            CiMethod::ST => "ST",
            CiMethod::BB => "BB",
            CiMethod::SBB => "SBB",
        }
    }
}

impl std::str::FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sn" => Ok(CiMethod::SN),
            "wb" => Ok(CiMethod::WB),
            "st" => Ok(CiMethod::ST),
            "bb" => Ok(CiMethod::BB),
            "sbb" => Ok(CiMethod::SBB),
            other => Err(Error::invalid(format!("unknown interval method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval<T> {
    pub lower: T,
    pub upper: T,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub point: T,
    pub method: CiMethod,
    pub tau_hat: T,
    pub k_n: usize,
}

impl<T: Real> ConfidenceInterval<T> {
    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierLaw {
    /// +-1 with probability 1/2 each.
    #[default]
    Rademacher,
    #[serde(alias = "standardgaussian")]
    Gaussian,
}

impl MultiplierLaw {
    #[inline]
    pub fn draw(self, rng: &mut StreamRng) -> f64 {
        match self {
            MultiplierLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MultiplierLaw::Gaussian => rng.sample(StandardNormal),
        }
    }
}

impl std::str::FromStr for MultiplierLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => Ok(MultiplierLaw::Rademacher),
            "gaussian" | "normal" => Ok(MultiplierLaw::Gaussian),
            other => Err(Error::invalid(format!("unknown multiplier law '{other}'"))),
        }
    }
}

/// Replicate values of a bootstrap statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapDistribution<T> {
    pub values: Vec<T>,
    pub b: usize,
    pub seed: u64,
}

impl<T: Real> BootstrapDistribution<T> {
    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> T {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap values"));
        sorted_quantile(&sorted, p)
    }

    fn quantile_pair(&self, lo: f64, hi: f64) -> (T, T) {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap values"));
        (sorted_quantile(&sorted, lo), sorted_quantile(&sorted, hi))
    }
}

pub(crate) fn sorted_quantile<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = T::of(h - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )))
    }
}

/// Runs `b` replicates in parallel. Replicate `r` draws from its own stream
/// keyed by `(seed, r)`; a `None` result is discarded and redrawn from the
/// same stream. Fails once the total number of draws passes `10 * b`.
pub(crate) fn run_replicates<T, F>(b: usize, seed: u64, one: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Option<T> + Sync,
{
    if b < 1 {
        return Err(Error::invalid("bootstrap size B must be at least 1"));
    }
    let cap = REDRAW_FACTOR * b;
    let results: Vec<(Option<T>, usize)> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, tag::BOOTSTRAP, r as u64);
            for attempt in 1..=cap {
                if let Some(v) = one(&mut g) {
                    return (Some(v), attempt);
                }
            }
            (None, cap)
        })
        .collect();
    let attempts: usize = results.iter().map(|(_, a)| a).sum();
    if attempts > cap || results.iter().any(|(v, _)| v.is_none()) {
        return Err(Error::BootstrapExhausted {
            attempts,
            required: b,
        });
    }
    Ok(results
        .into_iter()
        .map(|(v, _)| v.expect("checked"))
        .collect())
}

/// `mean +- z_{alpha/2} * tau_hat * V_n / n` with `tau_hat` from
/// [`lrv::lrv_selfnorm`].
pub fn sn_ci<T: Real>(x: &TimeSeries<T>, alpha: f64, k_n: usize) -> Result<ConfidenceInterval<T>> {
    check_alpha(alpha)?;
    let tau = lrv::lrv_selfnorm(x, k_n)?.tau_hat();
    let v_n = series::css(x).sqrt();
    if v_n <= T::zero() {
        return Err(Error::Degenerate("series is constant".into()));
    }
    let point = x.mean();
    let half = T::of(normal::two_sided_critical(alpha)) * tau * v_n / T::of_usize(x.len());
    Ok(ConfidenceInterval {
        lower: point - half,
        upper: point + half,
        level: 1.0 - alpha,
        point,
        method: CiMethod::SN,
        tau_hat: tau,
        k_n,
    })
}

/// Stationarity-based normal interval `mean +- z * tau_st / sqrt(n)`.
pub fn st_ci<T: Real>(x: &TimeSeries<T>, alpha: f64, k_n: usize) -> Result<ConfidenceInterval<T>> {
    check_alpha(alpha)?;
    let tau = lrv::lrv_stationary(x, k_n)?.tau_hat();
    let point = x.mean();
    let half = T::of(normal::two_sided_critical(alpha)) * tau / T::of_usize(x.len()).sqrt();
    Ok(ConfidenceInterval {
        lower: point - half,
        upper: point + half,
        level: 1.0 - alpha,
        point,
        method: CiMethod::ST,
        tau_hat: tau,
        k_n,
    })
}

/// Periods `T_1..T_k` and weights for `nu = sum beta_j mu_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationSpec<T> {
    pub segments: Vec<TimeSeries<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> CombinationSpec<T> {
    pub fn new(segments: Vec<TimeSeries<T>>, weights: Vec<T>) -> Result<Self> {
        if segments.is_empty() || segments.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} segments but {} weights",
                segments.len(),
                weights.len()
            )));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(Error::invalid("at least one weight must be nonzero"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight {w}")));
        }
        Ok(Self { segments, weights })
    }

    /// `sum beta_j mean_j`.
    pub fn point(&self) -> T {
        self.segments
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| w * s.mean())
            .sum()
    }

    /// `Lambda_n = sqrt(sum beta_j^2 / n_j^2 * css_j)`.
    pub fn lambda(&self) -> Result<T> {
        let mut acc = T::zero();
        for (j, (s, &w)) in self.segments.iter().zip(&self.weights).enumerate() {
            s.require_len(2)?;
            let c = series::css(s);
            if c <= T::zero() {
                return Err(Error::Degenerate(format!("segment {} is constant", j + 1)));
            }
            let nj = T::of_usize(s.len());
            acc = acc + w * w * c / (nj * nj);
        }
        Ok(acc.sqrt())
    }

    /// Each segment centered by its own mean, concatenated in order.
    pub fn pooled_residuals(&self) -> Vec<T> {
        self.segments
            .iter()
            .flat_map(|s| {
                let m = s.mean();
                s.iter().map(move |&v| v - m)
            })
            .collect()
    }

    fn check_lengths(&self, k_n: usize) -> Result<()> {
        for (j, s) in self.segments.iter().enumerate() {
            if s.len() < 2 * k_n {
                return Err(Error::invalid(format!(
                    "segment {} has {} observations, need at least 2 k_n = {}",
                    j + 1,
                    s.len(),
                    2 * k_n
                )));
            }
        }
        Ok(())
    }
}

/// Normal-theory interval for `nu`, with `tau_hat` estimated from the pooled
/// per-segment residuals.
pub fn combo_ci<T: Real>(
    spec: &CombinationSpec<T>,
    alpha: f64,
    k_n: usize,
) -> Result<ConfidenceInterval<T>> {
    spec.check_lengths(k_n)?;
    let pooled = spec.pooled_residuals();
    let tau = lrv::selfnorm_slice(&pooled, k_n)?.tau_hat();
    combo_ci_with_tau(spec, alpha, tau, k_n)
}

/// As [`combo_ci`] with a caller-supplied `tau_hat`.
pub fn combo_ci_with_tau<T: Real>(
    spec: &CombinationSpec<T>,
    alpha: f64,
    tau_hat: T,
    k_n: usize,
) -> Result<ConfidenceInterval<T>> {
    check_alpha(alpha)?;
    let lambda = spec.lambda()?;
    let point = spec.point();
    let half = T::of(normal::two_sided_critical(alpha)) * tau_hat * lambda;
    Ok(ConfidenceInterval {
        lower: point - half,
        upper: point + half,
        level: 1.0 - alpha,
        point,
        method: CiMethod::SN,
        tau_hat,
        k_n,
    })
}

/// Wild bootstrap of the combination pivot `(sum beta_j mean_j - nu) / (tau Lambda_n)`:
/// every segment's residuals get their own multipliers, and each replicate
/// re-estimates both `Lambda` and `tau`.
pub fn combo_wb_ci<T: Real>(
    spec: &CombinationSpec<T>,
    alpha: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<(ConfidenceInterval<T>, BootstrapDistribution<T>)> {
    check_alpha(alpha)?;
    spec.check_lengths(k_n)?;
    let pooled = spec.pooled_residuals();
    let tau = lrv::selfnorm_slice(&pooled, k_n)?.tau_hat();
    let lambda = spec.lambda()?;
    let lens: Vec<usize> = spec.segments.iter().map(|s| s.len()).collect();

    let values = run_replicates(b, seed, |g| {
        let xi: Vec<T> = pooled.iter().map(|&e| e * T::of(law.draw(g))).collect();
        let mut start = 0;
        let mut num = T::zero();
        let mut lam_sq = T::zero();
        let mut centered = Vec::with_capacity(xi.len());
        for (&len, &w) in lens.iter().zip(&spec.weights) {
            let seg = &xi[start..start + len];
            start += len;
            let s = crate::series::SegmentStats::from_slice(seg);
            if s.css <= T::zero() {
                return None;
            }
            let nj = T::of_usize(len);
            num = num + w * s.mean;
            lam_sq = lam_sq + w * w * s.css / (nj * nj);
            centered.extend(seg.iter().map(|&v| v - s.mean));
        }
        let tau_b = lrv::selfnorm_tau_sq(&centered, k_n).ok()?.sqrt();
        if !(tau_b > T::zero()) {
            return None;
        }
        Some(num / (tau_b * lam_sq.sqrt()))
    })?;
    let dist = BootstrapDistribution { values, b, seed };
    let (q_lo, q_hi) = dist.quantile_pair(alpha / 2.0, 1.0 - alpha / 2.0);
    let point = spec.point();
    let scale = tau * lambda;
    let ci = ConfidenceInterval {
        lower: point - q_hi * scale,
        upper: point - q_lo * scale,
        level: 1.0 - alpha,
        point,
        method: CiMethod::WB,
        tau_hat: tau,
        k_n,
    };
    Ok((ci, dist))
}

/// Wild bootstrap replicates `H^b = sum xi / (tau_b * sqrt(css(xi)))` with
/// `xi_i = (X_i - mean) * alpha_i`.
pub fn wild_bootstrap_mean<T: Real>(
    x: &TimeSeries<T>,
    b: usize,
    k_n: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<BootstrapDistribution<T>> {
    let m = x.mean();
    let eps: Vec<T> = x.iter().map(|&v| v - m).collect();
    wild_bootstrap_with(&eps, b, k_n, seed, |g| law.draw(g))
}

pub(crate) fn wild_bootstrap_with<T, F>(
    eps: &[T],
    b: usize,
    k_n: usize,
    seed: u64,
    multiplier: F,
) -> Result<BootstrapDistribution<T>>
where
    T: Real,
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    partition(eps.len(), k_n)?;
    let values = run_replicates(b, seed, |g| {
        let xi: Vec<T> = eps.iter().map(|&e| e * T::of(multiplier(g))).collect();
        wild_pivot(&xi, k_n)
    })?;
    Ok(BootstrapDistribution { values, b, seed })
}

fn wild_pivot<T: Real>(xi: &[T], k_n: usize) -> Option<T> {
    let sum: T = xi.iter().copied().sum();
    let css = series::css(xi);
    if css <= T::zero() {
        return None;
    }
    let tau_sq = lrv::selfnorm_tau_sq(xi, k_n).ok()?;
    if !(tau_sq > T::zero()) {
        return None;
    }
    Some(sum / (tau_sq.sqrt() * css.sqrt()))
}

/// Equal-tailed wild bootstrap interval
/// `[mean - q_{1-a/2} s, mean - q_{a/2} s]`, `s = tau_hat * V_n / n`.
pub fn wb_ci<T: Real>(
    x: &TimeSeries<T>,
    alpha: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<(ConfidenceInterval<T>, BootstrapDistribution<T>)> {
    check_alpha(alpha)?;
    let tau = lrv::lrv_selfnorm(x, k_n)?.tau_hat();
    let v_n = series::css(x).sqrt();
    if v_n <= T::zero() {
        return Err(Error::Degenerate("series is constant".into()));
    }
    let dist = wild_bootstrap_mean(x, b, k_n, law, seed)?;
    let (q_lo, q_hi) = dist.quantile_pair(alpha / 2.0, 1.0 - alpha / 2.0);
    let point = x.mean();
    let scale = tau * v_n / T::of_usize(x.len());
    let ci = ConfidenceInterval {
        lower: point - q_hi * scale,
        upper: point - q_lo * scale,
        level: 1.0 - alpha,
        point,
        method: CiMethod::WB,
        tau_hat: tau,
        k_n,
    };
    Ok((ci, dist))
}

/// Non-overlapping block bootstrap of `sqrt(n') (mean^b - E*mean^b)`.
///
/// Resamples `l = floor(n/k)` blocks with replacement; `E*` is the mean of
/// the `n' = l k` block-covered observations. The studentized variant divides
/// each replicate by the stationary `tau_hat` of the resampled series, which
/// needs at least two blocks.
pub fn block_bootstrap_mean<T: Real>(
    x: &TimeSeries<T>,
    b: usize,
    k_n: usize,
    studentized: bool,
    seed: u64,
) -> Result<BootstrapDistribution<T>> {
    let block_means = block_means(x, k_n, studentized)?;
    let values = block_bootstrap_with(&block_means, k_n, b, studentized, seed)?;
    Ok(BootstrapDistribution { values, b, seed })
}

fn block_means<T: Real>(x: &[T], k_n: usize, studentized: bool) -> Result<Vec<T>> {
    if k_n < 1 {
        return Err(Error::invalid("block length k_n must be at least 1"));
    }
    let l = x.len() / k_n;
    if l < 1 || (studentized && l < 2) {
        return Err(Error::InsufficientBlocks { n: x.len(), k: k_n });
    }
    Ok((0..l)
        .map(|j| series::mean(&x[j * k_n..(j + 1) * k_n]))
        .collect())
}

/// Works on block means: a resampled series of whole blocks has mean equal
/// to the average of its block means, and its stationary `tau^2` is
/// `k * mean((m_j - mean)^2)` over the chosen blocks.
fn block_bootstrap_with<T: Real>(
    means: &[T],
    k_n: usize,
    b: usize,
    studentized: bool,
    seed: u64,
) -> Result<Vec<T>> {
    let l = means.len();
    let lf = T::of_usize(l);
    let k = T::of_usize(k_n);
    let e_star = means.iter().copied().sum::<T>() / lf;
    let root_n = T::of_usize(l * k_n).sqrt();
    run_replicates(b, seed, |g| {
        let chosen: Vec<T> = (0..l).map(|_| means[g.random_range(0..l)]).collect();
        let mb = chosen.iter().copied().sum::<T>() / lf;
        let xi = root_n * (mb - e_star);
        if !studentized {
            return Some(xi);
        }
        let tau_sq = k * chosen.iter().map(|&m| (m - mb) * (m - mb)).sum::<T>() / lf;
        if tau_sq > T::zero() {
            Some(xi / tau_sq.sqrt())
        } else {
            None
        }
    })
}

/// Block-bootstrap interval for `mu`: plain quantiles of `Xi` stand in for
/// `sqrt(n)(mean - mu)`; the studentized version rescales by the original
/// series' stationary `tau_hat`.
pub fn bb_ci<T: Real>(
    x: &TimeSeries<T>,
    alpha: f64,
    k_n: usize,
    b: usize,
    studentized: bool,
    seed: u64,
) -> Result<(ConfidenceInterval<T>, BootstrapDistribution<T>)> {
    check_alpha(alpha)?;
    let tau = lrv::lrv_stationary(x, k_n)?.tau_hat();
    let dist = block_bootstrap_mean(x, b, k_n, studentized, seed)?;
    let (q_lo, q_hi) = dist.quantile_pair(alpha / 2.0, 1.0 - alpha / 2.0);
    let point = x.mean();
    let root_n = T::of_usize(x.len()).sqrt();
    let scale = if studentized {
        tau / root_n
    } else {
        T::one() / root_n
    };
    let ci = ConfidenceInterval {
        lower: point - q_hi * scale,
        upper: point - q_lo * scale,
        level: 1.0 - alpha,
        point,
        method: if studentized {
            CiMethod::SBB
        } else {
            CiMethod::BB
        },
        tau_hat: tau,
        k_n,
    };
    Ok((ci, dist))
}

/// Any of the five interval methods on one series. Bootstrap methods use `b`
/// replicates keyed by `seed`.
pub fn interval<T: Real>(
    method: CiMethod,
    x: &TimeSeries<T>,
    alpha: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<ConfidenceInterval<T>> {
    match method {
        CiMethod::SN => sn_ci(x, alpha, k_n),
        CiMethod::ST => st_ci(x, alpha, k_n),
        CiMethod::WB => wb_ci(x, alpha, k_n, b, law, seed).map(|r| r.0),
        CiMethod::BB => bb_ci(x, alpha, k_n, b, false, seed).map(|r| r.0),
        CiMethod::SBB => bb_ci(x, alpha, k_n, b, true, seed).map(|r| r.0),
    }
}
