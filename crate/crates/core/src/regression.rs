// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear trend `X_i = beta0 + beta1 (i/n) + sigma_i e_i` with
//! self-normalized intervals for both coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{check_alpha, CiMethod, ConfidenceInterval};
use crate::lrv::{LongRunEstimate, LrvMethod};
use crate::normal;
use crate::scalar::Real;
use crate::series::{self, partition, TimeSeries};

/// Residual sum of squares at or below this fraction of the total counts as an exact fit.
pub const EXACT_FIT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    Beta0,
    Beta1,
}

impl std::str::FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beta0" | "intercept" => Ok(Coefficient::Beta0),
            "beta1" | "slope" => Ok(Coefficient::Beta1),
            other => Err(Error::invalid(format!("unknown coefficient '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendFit<T> {
    pub beta0_hat: T,
    /// Slope per unit of `i/n`.
    pub beta1_hat: T,
    /// `X_i - beta0_hat - beta1_hat i/n`.
    pub residuals: Vec<T>,
    /// `sum (2n - 3i + 1)^2 r_i^2`.
    pub v_n0_sq: T,
    /// `sum (2i - n - 1)^2 r_i^2`.
    pub v_n1_sq: T,
    /// Centered sum of squares of the input, used to detect exact fits.
    pub total_css: T,
}

impl<T: Real> TrendFit<T> {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn residual_css(&self) -> T {
        series::css(&self.residuals)
    }

    pub fn is_exact(&self) -> bool {
        self.residual_css() <= T::of(EXACT_FIT_RATIO) * self.total_css
    }
}

/// Least-squares fit on the regressors `(1, i/n)`.
pub fn fit_trend<T: Real>(x: &TimeSeries<T>) -> Result<TrendFit<T>> {
    x.require_len(2)?;
    let n = x.len();
    let nf = T::of_usize(n);
    let two = T::of(2.0);
    let i_bar = (nf + T::one()) / two;
    let x_bar = x.mean();
    // centered cross-products; equal to the raw-sum form but stable for large n
    let sxy: T = x
        .iter()
        .enumerate()
        .map(|(i, &v)| (T::of_usize(i + 1) - i_bar) * (v - x_bar))
        .sum();
    let sxx = nf * (nf * nf - T::one()) / T::of(12.0);
    let beta1_hat = nf * sxy / sxx;
    let beta0_hat = x_bar - beta1_hat * (nf + T::one()) / (two * nf);
    let residuals: Vec<T> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| v - beta0_hat - beta1_hat * T::of_usize(i + 1) / nf)
        .collect();
    let mut v_n0_sq = T::zero();
    let mut v_n1_sq = T::zero();
    for (i, &r) in residuals.iter().enumerate() {
        let i = (i + 1) as f64;
        let n = n as f64;
        let w0 = T::of(2.0 * n - 3.0 * i + 1.0);
        let w1 = T::of(2.0 * i - n - 1.0);
        v_n0_sq = v_n0_sq + w0 * w0 * r * r;
        v_n1_sq = v_n1_sq + w1 * w1 * r * r;
    }
    Ok(TrendFit {
        beta0_hat,
        beta1_hat,
        residuals,
        v_n0_sq,
        v_n1_sq,
        total_css: series::css(x),
    })
}

/// Blockwise estimate with `D_j = sum_{I_j} r / sqrt(sum_{I_j} r^2)`; the
/// denominator is not centered within the block.
pub fn regression_lrv<T: Real>(fit: &TrendFit<T>, k_n: usize) -> Result<LongRunEstimate<T>> {
    residual_lrv(&fit.residuals, k_n)
}

/// Same estimator applied to an arbitrary residual vector.
pub fn residual_lrv<T: Real>(residuals: &[T], k_n: usize) -> Result<LongRunEstimate<T>> {
    let p = partition(residuals.len(), k_n)?;
    let mut d = Vec::with_capacity(p.l_n);
    for j in 1..=p.l_n {
        let block = &residuals[p.span(j)];
        let ss: T = block.iter().map(|&r| r * r).sum();
        if !(ss > T::zero()) {
            return Err(Error::DegenerateBlock { block: j });
        }
        d.push(block.iter().copied().sum::<T>() / ss.sqrt());
    }
    Ok(LongRunEstimate::from_d(d, k_n, LrvMethod::Regression))
}

/// `beta0_hat +- z tau 2 V_{n,0} / n^2` or `beta1_hat +- z tau 6 V_{n,1} / n^2`.
pub fn trend_ci<T: Real>(
    fit: &TrendFit<T>,
    which: Coefficient,
    alpha: f64,
    k_n: usize,
) -> Result<ConfidenceInterval<T>> {
    check_alpha(alpha)?;
    let (point, v_sq, mult) = match which {
        Coefficient::Beta0 => (fit.beta0_hat, fit.v_n0_sq, 2.0),
        Coefficient::Beta1 => (fit.beta1_hat, fit.v_n1_sq, 6.0),
    };
    if fit.is_exact() || !(v_sq > T::zero()) {
        return Err(Error::Degenerate("trend fits the data exactly".into()));
    }
    let tau = regression_lrv(fit, k_n)?.tau_hat();
    let n = T::of_usize(fit.n());
    let half = T::of(normal::two_sided_critical(alpha)) * tau * T::of(mult) * v_sq.sqrt() / (n * n);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{self, ErrorModel, MeanSpec, SigmaProfile, SimModel};
    use rand::{Rng, SeedableRng};

    fn ts(v: &[f64]) -> TimeSeries<f64> {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn hand_examples() {
        let f = fit_trend(&ts(&[0.0, 1.0])).unwrap();
        assert!(close(f.beta1_hat, 2.0, 1e-14) && close(f.beta0_hat, -1.0, 1e-14));

        let f = fit_trend(&ts(&[4.25; 9])).unwrap();
        assert_eq!((f.beta0_hat, f.beta1_hat), (4.25, 0.0));
        assert!(f.residuals.iter().all(|&r| r == 0.0));

        let n = 50;
        let x: Vec<f64> = (1..=n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let f = fit_trend(&ts(&x)).unwrap();
        assert!(close(f.beta0_hat, 1.0, 1e-12) && close(f.beta1_hat, 1.0, 1e-12));
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!(trend_ci(&f, Coefficient::Beta1, 0.05, 5)
            .unwrap_err()
            .is_degenerate());
        assert!(fit_trend(&ts(&[1.0])).is_err());
    }

    #[test]
    fn slope_weights_sum_to_zero() {
        let w: Vec<i64> = (1..=3).map(|i| 2 * i - 3 - 1).collect();
        assert_eq!(w, vec![-2, 0, 2]);
        assert_eq!(w.iter().sum::<i64>(), 0);
    }

    #[test]
    fn residual_lrv_examples() {
        let e = residual_lrv(&[1.0, -1.0, 1.0, -1.0], 2).unwrap();
        assert_eq!(e.tau_sq_hat, 0.0);
        let e = residual_lrv(&[1.0, 1.0, -1.0, -1.0], 2).unwrap();
        assert!(
            close(e.d_values[0], 2f64.sqrt(), 1e-15) && close(e.d_values[1], -(2f64.sqrt()), 1e-15)
        );
        assert!(close(e.tau_sq_hat, 2.0, 1e-14));
        assert_eq!(e.method, LrvMethod::Regression);
        assert_eq!(
            residual_lrv(&[1.0, 1.0, 0.0, 0.0], 2).unwrap_err(),
            Error::DegenerateBlock { block: 2 }
        );
    }

    /// Solves the 2x2 normal equations for `(1, i/n)` directly.
    fn normal_equations(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let (mut s1, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &y) in x.iter().enumerate() {
            let t = (i + 1) as f64 / n;
            s1 += 1.0;
            st += t;
            stt += t * t;
            sy += y;
            sty += t * y;
        }
        let det = s1 * stt - st * st;
        ((stt * sy - st * sty) / det, (s1 * sty - st * sy) / det)
    }

    #[test]
    fn matches_normal_equations() {
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = g.random_range(3..400);
            let slope = g.random_range(-5.0..5.0);
            let x: Vec<f64> = (0..n)
                .map(|i| slope * i as f64 / n as f64 + g.random_range(-2.0..2.0))
                .collect();
            let f = fit_trend(&ts(&x)).unwrap();
            let (b0, b1) = normal_equations(&x);
            assert!(close(f.beta0_hat, b0, 1e-10) && close(f.beta1_hat, b1, 1e-10));
            let sr: f64 = f.residuals.iter().sum();
            let sir: f64 = f
                .residuals
                .iter()
                .enumerate()
                .map(|(i, r)| (i + 1) as f64 * r)
                .sum();
            let scale: f64 = f
                .residuals
                .iter()
                .enumerate()
                .map(|(i, r)| ((i + 1) as f64 * r).abs())
                .sum();
            assert!(sr.abs() <= 1e-8 * scale && sir.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn equivariance() {
        let x = simgen::innovations(200, 4);
        let base = ts(&x);
        let f = fit_trend(&base).unwrap();
        for &(c, d) in &[(3.0, -2.0), (-0.5, 10.0)] {
            let g = fit_trend(&base.affine(c, d).unwrap()).unwrap();
            assert!(close(g.beta0_hat, c * f.beta0_hat + d, 1e-10));
            assert!(close(g.beta1_hat, c * f.beta1_hat, 1e-10));
            for (a, b) in f.residuals.iter().zip(&g.residuals) {
                assert!((c * a - b).abs() < 1e-10);
            }
            for which in [Coefficient::Beta0, Coefficient::Beta1] {
                let w = trend_ci(&f, which, 0.05, 10).unwrap().width();
                let v = trend_ci(&g, which, 0.05, 10).unwrap().width();
                assert!(close(v, c.abs() * w, 1e-10));
            }
        }
        let scaled: Vec<f64> = f.residuals.iter().map(|r| 7.0 * r).collect();
        let a = residual_lrv(&f.residuals, 10).unwrap();
        let b = residual_lrv(&scaled, 10).unwrap();
        for (u, v) in a.d_values.iter().zip(&b.d_values) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_coverage_monte_carlo() {
        let covered = (0..500u64)
            .filter(|&seed| {
                let noise = simgen::generate(&SimModel {
                    n: 240,
                    mean: MeanSpec::Constant { mu: 0.0 },
                    sigma: SigmaProfile::A2,
                    error: ErrorModel::b1(0.4),
                    seed,
                })
                .unwrap();
                let x: Vec<f64> = noise
                    .iter()
                    .enumerate()
                    .map(|(i, e)| 1.0 + 2.0 * (i + 1) as f64 / 240.0 + e)
                    .collect();
                let fit = fit_trend(&ts(&x)).unwrap();
                trend_ci(&fit, Coefficient::Beta1, 0.05, 15)
                    .unwrap()
                    .contains(2.0)
            })
            .count();
        assert!((455..=490).contains(&covered), "{covered}");
    }

    #[test]
    fn iid_residual_lrv_near_one() {
        let mean = (0..100u64)
            .map(|s| {
                let f = fit_trend(&ts(&simgen::innovations(5000, 300 + s))).unwrap();
                regression_lrv(&f, 25).unwrap().tau_sq_hat
            })
            .sum::<f64>()
            / 100.0;
        assert!((0.9..=1.1).contains(&mean), "{mean}");
    }
}
