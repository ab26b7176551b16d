// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic series `X_i = mu_i + sigma_i * e_i` with seeded, reproducible
//! innovation streams.
//!
//! Variance profiles A1-A4 and the error processes B1 (nonlinear
//! autoregression on `|eta|`) and B2 (polynomially decaying linear process)
//! are the standard fixtures for coverage, size and power studies.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::{self, tag};
use crate::series::TimeSeries;

/// Burn-in iterations discarded before collecting B1 output.
pub const DEFAULT_BURN_IN: usize = 1000;
/// Upper bound on the automatically chosen B2 truncation lag.
pub const MAX_TRUNCATION: usize = 100_000;
/// Coefficients below this (before normalization) are dropped from B2.
pub const TRUNCATION_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SigmaProfile {
    /// 0.2 for `i <= n/2`, 0.6 afterwards.
    A1,
    /// `0.2 (1 + cos^2(i / n^{4/5}))`.
    A2,
    /// `0.2 + 0.1 log(1 + |i - n/2|)`.
    A3,
    /// `0.3 + phi(i / 60)`.
    A4,
    Constant {
        value: f64,
    },
    Custom {
        values: Vec<f64>,
    },
}

impl SigmaProfile {
    pub fn label(&self) -> String {
        match self {
            SigmaProfile::A1 => "A1".into(),
            SigmaProfile::A2 => "A2".into(),
            SigmaProfile::A3 => "A3".into(),
            SigmaProfile::A4 => "A4".into(),
            SigmaProfile::Constant { value } => format!("const({value})"),
            SigmaProfile::Custom { .. } => "custom".into(),
        }
    }

    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        sigma_values(self, n)
    }
}

/// Materializes `sigma_1..sigma_n`.
pub fn sigma_values(profile: &SigmaProfile, n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::invalid("sigma profile length must be at least 1"));
    }
    let nf = n as f64;
    let half = n / 2;
    let out: Vec<f64> = match profile {
        SigmaProfile::A1 => (1..=n).map(|i| if i <= half { 0.2 } else { 0.6 }).collect(),
        SigmaProfile::A2 => {
            let scale = nf.powf(0.8);
            (1..=n)
                .map(|i| {
                    let c = (i as f64 / scale).cos();
                    0.2 * (1.0 + c * c)
                })
                .collect()
        }
        SigmaProfile::A3 => (1..=n)
            .map(|i| 0.2 + 0.1 * (1.0 + (i as f64 - nf / 2.0).abs()).ln())
            .collect(),
        SigmaProfile::A4 => (1..=n)
            .map(|i| 0.3 + normal::pdf(i as f64 / 60.0))
            .collect(),
        SigmaProfile::Constant { value } => vec![*value; n],
        SigmaProfile::Custom { values } => {
            if values.len() != n {
                return Err(Error::invalid(format!(
                    "custom sigma profile has {} values, expected {n}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    if let Some(i) = out.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid(format!(
            "sigma_{} = {} is not positive",
            i + 1,
            out[i]
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorModel {
    /// i.i.d. standard normal.
    Iid,
    /// Standardized `eta_i = theta |eta_{i-1}| + sqrt(1 - theta^2) eps_i`.
    B1 { theta: f64, burn_in: usize },
    /// `e_i = sum_{j<=J} a_j eps_{i-j}` with `a_j` proportional to `(j+1)^{-beta}`.
    /// `truncation = None` picks `J` from [`default_truncation`].
    B2 {
        beta: f64,
        truncation: Option<usize>,
    },
}

impl ErrorModel {
    pub fn b1(theta: f64) -> Self {
        ErrorModel::B1 {
            theta,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn b2(beta: f64) -> Self {
        ErrorModel::B2 {
            beta,
            truncation: None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ErrorModel::Iid => "iid".into(),
            ErrorModel::B1 { theta, .. } => format!("B1(theta={theta})"),
            ErrorModel::B2 { beta, .. } => format!("B2(beta={beta})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorModel::Iid => Ok(()),
            ErrorModel::B1 { theta, .. } if !(theta.abs() < 1.0) => Err(Error::invalid(format!(
                "B1 requires |theta| < 1, got {theta}"
            ))),
            ErrorModel::B2 { beta, .. } if !(beta > 0.5) => Err(Error::invalid(format!(
                "B2 requires beta > 1/2, got {beta}"
            ))),
            _ => Ok(()),
        }
    }

    /// Draws `e_1..e_n` from the streams keyed by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        match *self {
            ErrorModel::Iid => Ok(innovations(n, seed)),
            ErrorModel::B1 { theta, burn_in } => gen_b1_with_burn_in(n, theta, burn_in, seed),
            ErrorModel::B2 { beta, truncation } => gen_b2(
                n,
                beta,
                seed,
                truncation.unwrap_or_else(|| default_truncation(beta)),
            ),
        }
    }
}

/// `n` raw standard normal innovations from the main stream of `seed`.
pub fn innovations(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, tag::INNOVATION, 0);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// B1 errors with the default burn-in.
pub fn gen_b1(n: usize, theta: f64, seed: u64) -> Result<Vec<f64>> {
    gen_b1_with_burn_in(n, theta, DEFAULT_BURN_IN, seed)
}

/// B1 errors. The recursion starts at `eta_0 = 0` and runs `burn_in` steps on
/// a separate stream, so the collected path uses the main innovations
/// `eps_1..eps_n` exactly.
pub fn gen_b1_with_burn_in(n: usize, theta: f64, burn_in: usize, seed: u64) -> Result<Vec<f64>> {
    ErrorModel::B1 { theta, burn_in }.validate()?;
    let gain = (1.0 - theta * theta).sqrt();
    let center = theta * (2.0 / PI).sqrt();
    let scale = (1.0 - 2.0 * theta * theta / PI).sqrt();

    let mut eta = 0.0f64;
    let mut warm = rng::stream(seed, tag::BURN_IN, 0);
    for _ in 0..burn_in {
        let eps: f64 = warm.sample(StandardNormal);
        eta = theta * eta.abs() + gain * eps;
    }
    Ok(innovations(n, seed)
        .into_iter()
        .map(|eps| {
            eta = theta * eta.abs() + gain * eps;
            (eta - center) / scale
        })
        .collect())
}

/// Smallest `J` with `(J+1)^{-beta} < 1e-10`, capped at [`MAX_TRUNCATION`].
pub fn default_truncation(beta: f64) -> usize {
    let cut = TRUNCATION_THRESHOLD.powf(-1.0 / beta);
    if !cut.is_finite() || cut >= MAX_TRUNCATION as f64 {
        return MAX_TRUNCATION;
    }
    let mut j = cut.floor() as usize;
    // guard against rounding on either side of the threshold
    while j > 0 && (j as f64).powf(-beta) < TRUNCATION_THRESHOLD {
        j -= 1;
    }
    while ((j + 1) as f64).powf(-beta) >= TRUNCATION_THRESHOLD {
        j += 1;
    }
    j.min(MAX_TRUNCATION)
}

/// `a_0..a_J`, renormalized so that `sum a_j^2 = 1` over the truncated support.
pub fn b2_coefficients(beta: f64, truncation: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=truncation)
        .map(|j| ((j + 1) as f64).powf(-beta))
        .collect();
    // sum smallest terms first
    let norm = raw.iter().rev().map(|a| a * a).sum::<f64>().sqrt();
    raw.into_iter().map(|a| a / norm).collect()
}

/// B2 errors. Pre-sample innovations `eps_0, eps_{-1}, ...` come from their
/// own stream in that order, so raising the truncation only appends terms.
pub fn gen_b2(n: usize, beta: f64, seed: u64, truncation: usize) -> Result<Vec<f64>> {
    ErrorModel::B2 {
        beta,
        truncation: Some(truncation),
    }
    .validate()?;
    let a = b2_coefficients(beta, truncation);
    let mut pre = rng::stream(seed, tag::PRESAMPLE, 0);
    // eps[truncation + i - 1] holds eps_i for i in 1-J..=n
    let mut eps = vec![0.0; truncation + n];
    for m in 0..truncation {
        eps[truncation - 1 - m] = pre.sample(StandardNormal);
    }
    eps[truncation..].copy_from_slice(&innovations(n, seed));
    Ok((0..n)
        .map(|i| {
            let at = truncation + i;
            a.iter().enumerate().map(|(j, aj)| aj * eps[at - j]).sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeanSpec {
    Constant {
        mu: f64,
    },
    /// `mu_i = lambda * 1{i > change_at}`.
    Step {
        lambda: f64,
        change_at: usize,
    },
}

impl MeanSpec {
    fn at(&self, i: usize) -> f64 {
        match *self {
            MeanSpec::Constant { mu } => mu,
            MeanSpec::Step { lambda, change_at } => {
                if i > change_at {
                    lambda
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub n: usize,
    pub mean: MeanSpec,
    pub sigma: SigmaProfile,
    pub error: ErrorModel,
    pub seed: u64,
}

/// `X_i = mu_i + sigma_i e_i`.
pub fn generate(model: &SimModel) -> Result<TimeSeries<f64>> {
    if model.n < 1 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    model.error.validate()?;
    let sigma = sigma_values(&model.sigma, model.n)?;
    let e = model.error.sample(model.n, model.seed)?;
    let x = sigma
        .iter()
        .zip(&e)
        .enumerate()
        .map(|(i, (s, e))| model.mean.at(i + 1) + s * e)
        .collect();
    TimeSeries::new(x)
}

/// Flat key-value form of [`SimModel`] used for config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_error")]
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_at: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_profile() -> String {
    "constant".into()
}

fn default_error() -> String {
    "iid".into()
}

pub fn parse_profile(name: &str, constant: Option<f64>) -> Result<SigmaProfile> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "a1" => SigmaProfile::A1,
        "a2" => SigmaProfile::A2,
        "a3" => SigmaProfile::A3,
        "a4" => SigmaProfile::A4,
        "constant" | "const" => SigmaProfile::Constant {
            value: constant.unwrap_or(1.0),
        },
        other => return Err(Error::invalid(format!("unknown sigma profile '{other}'"))),
    })
}

pub fn parse_error_model(
    name: &str,
    theta: Option<f64>,
    beta: Option<f64>,
    burn_in: Option<usize>,
    truncation: Option<usize>,
) -> Result<ErrorModel> {
    let model = match name.to_ascii_lowercase().as_str() {
        "iid" | "gaussian" => ErrorModel::Iid,
        "b1" => ErrorModel::B1 {
            theta: theta.ok_or_else(|| Error::invalid("B1 needs theta"))?,
            burn_in: burn_in.unwrap_or(DEFAULT_BURN_IN),
        },
        "b2" => ErrorModel::B2 {
            beta: beta.ok_or_else(|| Error::invalid("B2 needs beta"))?,
            truncation,
        },
        other => return Err(Error::invalid(format!("unknown error model '{other}'"))),
    };
    model.validate()?;
    Ok(model)
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<SimModel> {
        let mean = match (self.lambda, self.change_at) {
            (Some(lambda), Some(change_at)) => MeanSpec::Step { lambda, change_at },
            (None, None) => MeanSpec::Constant { mu: self.mu },
            _ => {
                return Err(Error::invalid(
                    "lambda and change_at must be given together",
                ))
            }
        };
        Ok(SimModel {
            n: self.n,
            mean,
            sigma: parse_profile(&self.profile, self.sigma)?,
            error: parse_error_model(
                &self.error,
                self.theta,
                self.beta,
                self.burn_in,
                self.truncation,
            )?,
            seed: self.seed,
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid(format!("model config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (
            m,
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0),
        )
    }

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let (m, v) = sample_mean_var(x);
        let c: f64 =
            x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (x.len() - 1) as f64;
        c / v
    }

    #[test]
    fn a1_switches_after_half() {
        let s = sigma_values(&SigmaProfile::A1, 120).unwrap();
        assert_eq!(s[59], 0.2);
        assert_eq!(s[60], 0.6);
        // odd n uses floor(n/2)
        let s = sigma_values(&SigmaProfile::A1, 7).unwrap();
        assert_eq!(s[2], 0.2);
        assert_eq!(s[3], 0.6);
    }

    #[test]
    fn a3_and_a4_reference_points() {
        let s = sigma_values(&SigmaProfile::A3, 120).unwrap();
        assert!((s[59] - 0.2).abs() < 1e-15);
        let s = sigma_values(&SigmaProfile::A4, 120).unwrap();
        let phi1 = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((s[59] - (0.3 + phi1)).abs() < 1e-15);
    }

    #[test]
    fn a2_uses_real_power() {
        let n = 120usize;
        let s = sigma_values(&SigmaProfile::A2, n).unwrap();
        let c = (7.0 / (n as f64).powf(0.8)).cos();
        assert!((s[6] - 0.2 * (1.0 + c * c)).abs() < 1e-15);
    }

    #[test]
    fn profiles_positive() {
        for p in [
            SigmaProfile::A1,
            SigmaProfile::A2,
            SigmaProfile::A3,
            SigmaProfile::A4,
        ] {
            for n in [1, 2, 7, 120, 1201] {
                assert!(sigma_values(&p, n).unwrap().iter().all(|&s| s > 0.0));
            }
        }
        assert!(sigma_values(
            &SigmaProfile::Custom {
                values: vec![1.0, 0.0]
            },
            2
        )
        .is_err());
        assert!(sigma_values(&SigmaProfile::Custom { values: vec![1.0] }, 2).is_err());
    }

    #[test]
    fn b1_theta_zero_is_raw_stream() {
        assert_eq!(gen_b1(50, 0.0, 9).unwrap(), innovations(50, 9));
    }

    #[test]
    fn b1_rejects_unit_theta() {
        assert!(gen_b1(10, 1.0, 0).is_err());
        assert!(gen_b1(10, -1.2, 0).is_err());
    }

    #[test]
    fn b1_standardization() {
        let e = gen_b1(1_000_000, 0.4, 3).unwrap();
        let (m, v) = sample_mean_var(&e);
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn b1_strong_dependence() {
        let e = gen_b1(1_000_000, 0.8, 4).unwrap();
        assert!(lag1_autocorr(&e) > 0.3);
    }

    #[test]
    fn b2_zero_truncation_is_raw_stream() {
        assert_eq!(b2_coefficients(3.0, 0), vec![1.0]);
        assert_eq!(gen_b2(50, 3.0, 9, 0).unwrap(), innovations(50, 9));
        assert_eq!(gen_b2(50, 3.0, 9, 0).unwrap(), gen_b1(50, 0.0, 9).unwrap());
    }

    #[test]
    fn b2_unit_norm_and_variance() {
        for beta in [0.6, 2.1, 3.0, 4.0] {
            let a = b2_coefficients(beta, 500);
            let s: f64 = a.iter().map(|v| v * v).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        let e = gen_b2(200_000, 3.0, 5, default_truncation(3.0)).unwrap();
        let (_, v) = sample_mean_var(&e);
        assert!((v - 1.0).abs() < 0.02, "var {v}");
        assert!(gen_b2(10, 0.5, 0, 3).is_err());
    }

    #[test]
    fn b2_truncation_choice() {
        let j = default_truncation(3.0);
        assert!(((j + 1) as f64).powf(-3.0) < 1e-10);
        assert!((j as f64).powf(-3.0) >= 1e-10);
        assert_eq!(default_truncation(0.51), MAX_TRUNCATION);
    }

    #[test]
    fn b2_insensitive_to_longer_truncation() {
        // a_J < 1e-12 for beta = 4 once J + 1 > 1000
        let base = gen_b2(1000, 4.0, 11, 1100).unwrap();
        let longer = gen_b2(1000, 4.0, 11, 3000).unwrap();
        let diff = base
            .iter()
            .zip(&longer)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn generate_compositions() {
        let base = SimModel {
            n: 64,
            mean: MeanSpec::Constant { mu: 0.0 },
            sigma: SigmaProfile::Constant { value: 1.0 },
            error: ErrorModel::Iid,
            seed: 21,
        };
        assert_eq!(generate(&base).unwrap().into_vec(), innovations(64, 21));
        let step = SimModel {
            mean: MeanSpec::Step {
                lambda: 0.0,
                change_at: 40,
            },
            ..base.clone()
        };
        assert_eq!(generate(&step).unwrap(), generate(&base).unwrap());
        let again = generate(&base).unwrap();
        assert_eq!(generate(&base).unwrap(), again);
    }

    #[test]
    fn a1_b1_half_ratio() {
        let mut ratios = Vec::new();
        for seed in 0..100 {
            let m = SimModel {
                n: 120,
                mean: MeanSpec::Constant { mu: 0.0 },
                sigma: SigmaProfile::A1,
                error: ErrorModel::b1(0.4),
                seed,
            };
            let x = generate(&m).unwrap();
            let (_, v1) = sample_mean_var(&x[..60]);
            let (_, v2) = sample_mean_var(&x[60..]);
            ratios.push((v2 / v1).sqrt());
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((2.0..=4.0).contains(&avg), "{avg}");
    }

    #[test]
    fn config_round_trip() {
        let text = "n = 120\nprofile = \"A1\"\nerror = \"b1\"\ntheta = 0.4\nlambda = 1.5\nchange_at = 40\nseed = 7\n";
        let cfg = ModelConfig::from_toml_str(text).unwrap();
        let model = cfg.to_model().unwrap();
        assert_eq!(model.sigma, SigmaProfile::A1);
        assert_eq!(model.error, ErrorModel::b1(0.4));
        assert_eq!(
            model.mean,
            MeanSpec::Step {
                lambda: 1.5,
                change_at: 40
            }
        );
        let back = ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(ModelConfig::from_toml_str("n = 3\nbogus = 1\n").is_err());
    }
}
