// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM change-point tests for a single shift in the mean.
//!
//! `T1` and `T2` are the classical scans scaled by a stationary long-run
//! variance and calibrated with the block bootstrap. `SN` normalizes the
//! contrast at each split by the prefix and suffix sums of squares, scales
//! by a self-normalized `tau_hat` computed from split-centered residuals,
//! and is calibrated with the wild bootstrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{run_replicates, BootstrapDistribution, MultiplierLaw};
use crate::lrv;
use crate::scalar::Real;
use crate::series::{self, split_scan, TimeSeries};

pub const DEFAULT_TRIM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CusumVariant {
    /// `|S_X(j)| / sqrt(j (1 - j/n))`.
    T1,
    /// `|S_X(j)|`.
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestKind {
    SN,
    T1,
    T2,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::SN, TestKind::T1, TestKind::T2];

    pub fn label(self) -> &'static str {
        match self {
            TestKind::SN => "SN",
            TestKind::T1 => "T1",
            TestKind::T2 => "T2",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sn" => Ok(TestKind::SN),
            "t1" => Ok(TestKind::T1),
            "t2" => Ok(TestKind::T2),
            other => Err(Error::invalid(format!("unknown test '{other}'"))),
        }
    }
}

/// Scan values over the trimmed range `j_first..=j_last`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CusumScan<T> {
    pub c: f64,
    pub j_first: usize,
    pub j_last: usize,
    /// `values[i]` belongs to `j = j_first + i`. Signed for the SN scan.
    pub values: Vec<T>,
    /// `|values|` at `j_hat`.
    pub max_value: T,
    /// First `j` attaining the maximum of `|values|`.
    pub j_hat: usize,
}

impl<T: Real> CusumScan<T> {
    fn from_values(c: f64, j_first: usize, values: Vec<T>) -> Self {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if v.abs() > values[best].abs() {
                best = i;
            }
        }
        Self {
            c,
            j_first,
            j_last: j_first + values.len() - 1,
            max_value: values[best].abs(),
            j_hat: j_first + best,
            values,
        }
    }

    pub fn value_at(&self, j: usize) -> Option<T> {
        j.checked_sub(self.j_first)
            .and_then(|i| self.values.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointReport<T> {
    pub test: TestKind,
    /// Maximum of the scan divided by `tau_hat`.
    pub statistic: T,
    pub j_hat: usize,
    /// `(1 + #{T_b >= T_obs}) / (B + 1)`.
    pub p_value: f64,
    pub tau_hat: T,
    pub k_n: usize,
    pub scan: CusumScan<T>,
    pub bootstrap: BootstrapDistribution<T>,
}

/// Trimmed split range `ceil(c n) ..= floor((1 - c) n)`, clipped to `1..=n-1`.
pub fn trimmed_range(n: usize, c: f64) -> Result<(usize, usize)> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::invalid(format!(
            "trimming fraction must lie in (0, 1/2), got {c}"
        )));
    }
    let nf = n as f64;
    // absorb representation error in c * n before rounding
    let first = ((c * nf - 1e-9).ceil() as usize).max(1);
    let last = (((1.0 - c) * nf + 1e-9).floor() as usize).min(n.saturating_sub(1));
    if n < 2 || first > last {
        return Err(Error::invalid(format!(
            "n = {n} leaves no split points at trimming c = {c}"
        )));
    }
    Ok((first, last))
}

/// `S_X(j) = (1 - j/n) sum_{i<=j} X_i - (j/n) sum_{i>j} X_i`.
pub fn sx<T: Real>(x: &TimeSeries<T>, j: usize) -> Result<T> {
    let n = x.len();
    if j < 1 || j >= n {
        return Err(Error::invalid(format!(
            "split j = {j} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(centered_cumsum(x)[j - 1])
}

/// `S_X(j)` for every `j`, as partial sums of `X_i - mean`.
pub(crate) fn centered_cumsum<T: Real>(xs: &[T]) -> Vec<T> {
    let m = series::mean(xs);
    let mut acc = T::zero();
    xs.iter()
        .map(|&v| {
            acc = acc + (v - m);
            acc
        })
        .collect()
}

/// Classical CUSUM scan divided by `tau_hat`.
pub fn classical_scan<T: Real>(
    x: &TimeSeries<T>,
    c: f64,
    tau_hat: T,
    variant: CusumVariant,
) -> Result<CusumScan<T>> {
    if !(tau_hat > T::zero()) {
        return Err(Error::invalid(format!(
            "tau_hat must be positive, got {tau_hat}"
        )));
    }
    classical_scan_slice(x, c, tau_hat, variant)
}

fn classical_scan_slice<T: Real>(
    xs: &[T],
    c: f64,
    tau_hat: T,
    variant: CusumVariant,
) -> Result<CusumScan<T>> {
    let n = xs.len();
    let (first, last) = trimmed_range(n, c)?;
    let s = centered_cumsum(xs);
    let nf = T::of_usize(n);
    let values = (first..=last)
        .map(|j| {
            let v = s[j - 1].abs() / tau_hat;
            match variant {
                CusumVariant::T2 => v,
                CusumVariant::T1 => {
                    let jf = T::of_usize(j);
                    v / (jf * (T::one() - jf / nf)).sqrt()
                }
            }
        })
        .collect();
    Ok(CusumScan::from_values(c, first, values))
}

/// Self-normalized scan
/// `T_n(j) = S_X(j) / sqrt((1 - j/n)^2 V_pre(j)^2 + (j/n)^2 V_post(j)^2)`,
/// not yet divided by `tau_hat`.
pub fn sn_scan<T: Real>(x: &TimeSeries<T>, c: f64) -> Result<CusumScan<T>> {
    sn_scan_slice(x, c)
}

fn sn_scan_slice<T: Real>(xs: &[T], c: f64) -> Result<CusumScan<T>> {
    let n = xs.len();
    let (first, last) = trimmed_range(n, c)?;
    let s = centered_cumsum(xs);
    let splits = split_scan(xs);
    let nf = T::of_usize(n);
    let mut values = Vec::with_capacity(last - first + 1);
    for j in first..=last {
        let p = &splits[j - 1];
        let post = p.suffix.map_or(T::zero(), |q| q.css);
        let w = T::of_usize(j) / nf;
        let one_minus = T::one() - w;
        let denom = (one_minus * one_minus * p.prefix.css + w * w * post).sqrt();
        if !(denom > T::zero()) {
            return Err(Error::DegenerateScan { j });
        }
        values.push(s[j - 1] / denom);
    }
    Ok(CusumScan::from_values(c, first, values))
}

/// Residuals after removing the mean of `1..=j_hat` and of `j_hat+1..=n` separately.
pub fn split_residuals<T: Real>(xs: &[T], j_hat: usize) -> Vec<T> {
    let (a, b) = xs.split_at(j_hat);
    let ma = series::mean(a);
    let mb = series::mean(b);
    a.iter()
        .map(|&v| v - ma)
        .chain(b.iter().map(|&v| v - mb))
        .collect()
}

struct SnOutcome<T> {
    scan: CusumScan<T>,
    residuals: Vec<T>,
    tau: T,
    statistic: T,
}

/// Locate, split-center, estimate `tau`, and scale the scan maximum.
fn sn_pipeline<T: Real>(xs: &[T], c: f64, k_n: usize) -> Result<SnOutcome<T>> {
    let scan = sn_scan_slice(xs, c)?;
    let residuals = split_residuals(xs, scan.j_hat);
    let tau_sq = lrv::selfnorm_tau_sq(&residuals, k_n)?;
    if !(tau_sq > T::zero()) {
        return Err(Error::Degenerate("zero long-run variance estimate".into()));
    }
    let tau = tau_sq.sqrt();
    let statistic = scan.max_value / tau;
    Ok(SnOutcome {
        scan,
        residuals,
        tau,
        statistic,
    })
}

/// Self-normalized statistic and its location, without calibration.
pub fn sn_statistic<T: Real>(x: &TimeSeries<T>, c: f64, k_n: usize) -> Result<(T, usize)> {
    let o = sn_pipeline(x, c, k_n)?;
    Ok((o.statistic, o.scan.j_hat))
}

/// Classical statistic with `tau_hat` from the stationary estimator.
/// `None` when the series is constant.
pub fn classical_statistic<T: Real>(
    x: &TimeSeries<T>,
    c: f64,
    k_n: usize,
    variant: CusumVariant,
) -> Result<Option<(T, usize)>> {
    let tau = lrv::stationary_tau_sq(x, k_n)?.sqrt();
    if !(tau > T::zero()) {
        trimmed_range(x.len(), c)?;
        return Ok(None);
    }
    let scan = classical_scan_slice(x, c, tau, variant)?;
    Ok(Some((scan.max_value, scan.j_hat)))
}

pub(crate) fn p_value<T: Real>(observed: T, replicates: &[T]) -> f64 {
    let exceed = replicates.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Self-normalized CUSUM test calibrated by the wild bootstrap. Each
/// replicate reruns the whole pipeline (location, split centering,
/// `tau_hat`) on `xi_i = eps_i * alpha_i`.
pub fn sn_test<T: Real>(
    x: &TimeSeries<T>,
    c: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<ChangePointReport<T>> {
    let obs = sn_pipeline(x, c, k_n)?;
    let eps = &obs.residuals;
    let values = run_replicates(b, seed, |g| {
        let xi: Vec<T> = eps.iter().map(|&e| e * T::of(law.draw(g))).collect();
        sn_pipeline(&xi, c, k_n).ok().map(|o| o.statistic)
    })?;
    Ok(ChangePointReport {
        test: TestKind::SN,
        statistic: obs.statistic,
        j_hat: obs.scan.j_hat,
        p_value: p_value(obs.statistic, &values),
        tau_hat: obs.tau,
        k_n,
        scan: obs.scan,
        bootstrap: BootstrapDistribution { values, b, seed },
    })
}

/// Classical CUSUM test calibrated by the non-overlapping block bootstrap of
/// the globally centered series. Each replicate recomputes its own
/// stationary `tau_hat`. A constant series gives statistic 0 and p-value 1.
pub fn classical_test<T: Real>(
    x: &TimeSeries<T>,
    c: f64,
    k_n: usize,
    b: usize,
    variant: CusumVariant,
    seed: u64,
) -> Result<ChangePointReport<T>> {
    let test = match variant {
        CusumVariant::T1 => TestKind::T1,
        CusumVariant::T2 => TestKind::T2,
    };
    let p = series::partition(x.len(), k_n)?;
    if b < 1 {
        return Err(Error::invalid("bootstrap size B must be at least 1"));
    }
    let m = x.mean();
    let centered: Vec<T> = x.iter().map(|&v| v - m).collect();
    let tau = lrv::stationary_tau_sq(&centered, k_n)?.sqrt();
    if !(tau > T::zero()) {
        let (first, last) = trimmed_range(x.len(), c)?;
        let scan = CusumScan::from_values(c, first, vec![T::zero(); last - first + 1]);
        return Ok(ChangePointReport {
            test,
            statistic: T::zero(),
            j_hat: scan.j_hat,
            p_value: 1.0,
            tau_hat: T::zero(),
            k_n,
            scan,
            bootstrap: BootstrapDistribution {
                values: vec![T::zero(); b],
                b,
                seed,
            },
        });
    }
    let scan = classical_scan_slice(&centered, c, tau, variant)?;
    let statistic = scan.max_value;
    let (l, k) = (p.l_n, p.k_n);
    // resampled length n' = l k must still admit a trimmed range
    trimmed_range(l * k, c)?;
    let values = run_replicates(b, seed, |g| {
        let mut xb = Vec::with_capacity(l * k);
        for _ in 0..l {
            let j = g.random_range(0..l);
            xb.extend_from_slice(&centered[j * k..(j + 1) * k]);
        }
        let tau_b = lrv::stationary_tau_sq(&xb, k).ok()?.sqrt();
        if !(tau_b > T::zero()) {
            return None;
        }
        classical_scan_slice(&xb, c, tau_b, variant)
            .ok()
            .map(|s| s.max_value)
    })?;
    Ok(ChangePointReport {
        test,
        statistic,
        j_hat: scan.j_hat,
        p_value: p_value(statistic, &values),
        tau_hat: tau,
        k_n,
        scan,
        bootstrap: BootstrapDistribution { values, b, seed },
    })
}

/// `(X_i - mean)^2`; a mean-shift test on this series targets a change in variance.
pub fn variance_transform<T: Real>(x: &TimeSeries<T>) -> Result<TimeSeries<T>> {
    let m = x.mean();
    let t: Vec<T> = x.iter().map(|&v| (v - m) * (v - m)).collect();
    if t.iter().all(|&v| v == t[0]) {
        return Err(Error::Degenerate("squared deviations are constant".into()));
    }
    Ok(TimeSeries::from_vec_unchecked(t))
}

/// Self-normalized test for a single change in the variances.
pub fn variance_change_test<T: Real>(
    x: &TimeSeries<T>,
    c: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<ChangePointReport<T>> {
    sn_test(&variance_transform(x)?, c, k_n, b, law, seed)
}

/// Runs `test` on `x`; the wild-bootstrap multiplier law only affects `SN`.
pub fn run_test<T: Real>(
    test: TestKind,
    x: &TimeSeries<T>,
    c: f64,
    k_n: usize,
    b: usize,
    law: MultiplierLaw,
    seed: u64,
) -> Result<ChangePointReport<T>> {
    match test {
        TestKind::SN => sn_test(x, c, k_n, b, law, seed),
        TestKind::T1 => classical_test(x, c, k_n, b, CusumVariant::T1, seed),
        TestKind::T2 => classical_test(x, c, k_n, b, CusumVariant::T2, seed),
    }
}
