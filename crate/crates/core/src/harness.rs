// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo experiments: interval coverage, test size under the null, and
//! size-adjusted power along a grid of mean shifts.
//!
//! Seeds form a tree. A `(profile, error)` group gets its seed from the
//! master seed. Replicate `r` of that group gets its own seed, and every
//! `(k, method)` cell reuses that replicate's data. Bootstrap streams hang off
//! the replicate seed. Results therefore do not depend on thread count or on
//! the order in which cells are evaluated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::{self, CusumVariant, TestKind};
use crate::error::{Error, Result};
use crate::inference::{self, sorted_quantile, CiMethod, MultiplierLaw};
use crate::rng::{derive_seed, label_hash, tag};
use crate::series::TimeSeries;
use crate::simgen::{self, ErrorModel, MeanSpec, SigmaProfile, SimModel};

pub const DEFAULT_REPLICATIONS: usize = 500;
pub const DEFAULT_BOOTSTRAP: usize = 500;
pub const DEFAULT_CALIBRATION: usize = 2000;
pub const MIN_CALIBRATION: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Coverage,
    Size,
    Power,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coverage" => Ok(ExperimentKind::Coverage),
            "size" => Ok(ExperimentKind::Size),
            "power" => Ok(ExperimentKind::Power),
            other => Err(Error::invalid(format!("unknown experiment kind '{other}'"))),
        }
    }
}

/// Experiment description, readable from TOML.
///
/// Error models are written `iid`, `B1(0.4)` or `B2(3)`; profiles `A1`-`A4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_n")]
    pub n: usize,
    pub sigma_profiles: Vec<String>,
    pub error_models: Vec<String>,
    pub k_values: Vec<usize>,
    pub methods: Vec<String>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_boot")]
    pub bootstrap_samples: usize,
    #[serde(default = "default_level")]
    pub nominal_level: f64,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_calibration")]
    pub calibration_reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_change_at")]
    pub change_at: usize,
    #[serde(default = "default_trim")]
    pub trim: f64,
    #[serde(default)]
    pub multiplier: MultiplierLaw,
}

fn default_n() -> usize {
    120
}
fn default_reps() -> usize {
    DEFAULT_REPLICATIONS
}
fn default_boot() -> usize {
    DEFAULT_BOOTSTRAP
}
fn default_level() -> f64 {
    0.95
}
fn default_calibration() -> usize {
    DEFAULT_CALIBRATION
}
fn default_change_at() -> usize {
    40
}
fn default_trim() -> f64 {
    changepoint::DEFAULT_TRIM
}

/// Shift sizes used when a power spec leaves the grid empty.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

impl ExperimentSpec {
    /// Spec with desk-scale defaults for everything but the grid.
    pub fn new(
        kind: ExperimentKind,
        sigma_profiles: &[&str],
        error_models: &[&str],
        k_values: &[usize],
        methods: &[&str],
    ) -> Self {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            kind,
            n: default_n(),
            sigma_profiles: owned(sigma_profiles),
            error_models: owned(error_models),
            k_values: k_values.to_vec(),
            methods: owned(methods),
            replications: DEFAULT_REPLICATIONS,
            bootstrap_samples: DEFAULT_BOOTSTRAP,
            nominal_level: default_level(),
            lambda_grid: if kind == ExperimentKind::Power {
                default_lambda_grid()
            } else {
                Vec::new()
            },
            calibration_reps: DEFAULT_CALIBRATION,
            master_seed: 0,
            change_at: default_change_at(),
            trim: default_trim(),
            multiplier: MultiplierLaw::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid(format!("experiment config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment spec always serializes")
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.nominal_level
    }

    fn profiles(&self) -> Result<Vec<SigmaProfile>> {
        self.sigma_profiles
            .iter()
            .map(|p| simgen::parse_profile(p, None))
            .collect()
    }

    fn errors(&self) -> Result<Vec<ErrorModel>> {
        self.error_models
            .iter()
            .map(|e| parse_error_spec(e))
            .collect()
    }

    fn ci_methods(&self) -> Result<Vec<CiMethod>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    fn tests(&self) -> Result<Vec<TestKind>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 || self.bootstrap_samples < 1 {
            return Err(Error::invalid(
                "replications and bootstrap_samples must be at least 1",
            ));
        }
        if !(self.nominal_level > 0.0 && self.nominal_level < 1.0) {
            return Err(Error::invalid(format!(
                "nominal level must lie in (0, 1), got {}",
                self.nominal_level
            )));
        }
        if self.sigma_profiles.is_empty()
            || self.error_models.is_empty()
            || self.k_values.is_empty()
            || self.methods.is_empty()
        {
            return Err(Error::invalid(
                "profiles, error models, k values and methods must be nonempty",
            ));
        }
        self.profiles()?;
        for e in self.errors()? {
            e.validate()?;
        }
        for &k in &self.k_values {
            crate::series::partition(self.n, k)?;
        }
        match self.kind {
            ExperimentKind::Coverage => {
                self.ci_methods()?;
            }
            ExperimentKind::Size => {
                self.tests()?;
                changepoint::trimmed_range(self.n, self.trim)?;
            }
            ExperimentKind::Power => {
                self.tests()?;
                changepoint::trimmed_range(self.n, self.trim)?;
                if !self.lambda_grid.contains(&0.0) {
                    return Err(Error::invalid("power grid must include lambda = 0"));
                }
                if self.calibration_reps < MIN_CALIBRATION {
                    return Err(Error::invalid(format!(
                        "calibration_reps must be at least {MIN_CALIBRATION}"
                    )));
                }
                if self.change_at >= self.n {
                    return Err(Error::invalid("change_at must be below n"));
                }
            }
        }
        Ok(())
    }
}

/// Parses `iid`, `B1(theta)` or `B2(beta)`; `B1:0.4` is also accepted.
pub fn parse_error_spec(s: &str) -> Result<ErrorModel> {
    let t = s.trim();
    let (name, arg) = match t.find(['(', ':']) {
        Some(i) => (&t[..i], Some(t[i + 1..].trim_end_matches(')').trim())),
        None => (t, None),
    };
    let value = match arg {
        Some(a) => Some(
            a.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad error-model parameter in '{s}'")))?,
        ),
        None => None,
    };
    let model = simgen::parse_error_model(name.trim(), value, value, None, None)?;
    model.validate()?;
    Ok(model)
}

/// Short label used in result tables, e.g. `B1(0.4)`.
pub fn error_label(e: &ErrorModel) -> String {
    match e {
        ErrorModel::Iid => "iid".into(),
        ErrorModel::B1 { theta, .. } => format!("B1({theta})"),
        ErrorModel::B2 { beta, .. } => format!("B2({beta})"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub profile: String,
    pub error: String,
    pub k: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Coverage or rejection fraction among completed replicates.
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / trials)`.
    pub se: f64,
    pub hits: usize,
    pub trials: usize,
    /// Replicates where the procedure returned an error.
    pub failures: usize,
    /// Calibrated critical value (power runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
}

impl CellResult {
    fn new(key: &CellKey, tally: Tally, critical_value: Option<f64>) -> Self {
        let rate = if tally.trials > 0 {
            tally.hits as f64 / tally.trials as f64
        } else {
            f64::NAN
        };
        let se = if tally.trials > 0 {
            (rate * (1.0 - rate) / tally.trials as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            profile: key.profile.clone(),
            error: key.error.clone(),
            k: key.k,
            method: key.method.clone(),
            lambda: key.lambda,
            rate,
            se,
            hits: tally.hits,
            trials: tally.trials,
            failures: tally.failures,
            critical_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentMetadata {
    pub spec: ExperimentSpec,
    pub master_seed: u64,
    pub wall_time_secs: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub metadata: ExperimentMetadata,
}

impl ExperimentResult {
    pub fn cell(
        &self,
        profile: &str,
        error: &str,
        k: usize,
        method: &str,
        lambda: Option<f64>,
    ) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.profile.eq_ignore_ascii_case(profile)
                && c.error.eq_ignore_ascii_case(error)
                && c.k == k
                && c.method.eq_ignore_ascii_case(method)
                && c.lambda == lambda
        })
    }

    /// Rates in percent, one row per `(profile, error, k[, lambda])` and one column per method.
    pub fn pivot_table(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        type RowKey = (usize, String, String, usize, u64);
        let mut rows: BTreeMap<RowKey, BTreeMap<&str, f64>> = BTreeMap::new();
        for (i, c) in self.cells.iter().enumerate() {
            if !methods.contains(&c.method.as_str()) {
                methods.push(&c.method);
            }
            // keep first-appearance order of (profile, error) groups
            let group = self
                .cells
                .iter()
                .position(|d| d.profile == c.profile && d.error == c.error)
                .unwrap_or(i);
            let key = (
                group,
                c.profile.clone(),
                c.error.clone(),
                c.k,
                c.lambda.unwrap_or(0.0).to_bits(),
            );
            rows.entry(key)
                .or_default()
                .insert(&c.method, c.rate * 100.0);
        }
        let power = self.cells.iter().any(|c| c.lambda.is_some());
        let mut out = String::new();
        let _ = write!(out, "{:<8}{:<12}{:>5}", "profile", "error", "k");
        if power {
            let _ = write!(out, "{:>8}", "lambda");
        }
        for m in &methods {
            let _ = write!(out, "{m:>8}");
        }
        out.push('\n');
        for ((_, profile, error, k, lambda), vals) in &rows {
            let _ = write!(out, "{profile:<8}{error:<12}{k:>5}");
            if power {
                let _ = write!(out, "{:>8.3}", f64::from_bits(*lambda));
            }
            for m in &methods {
                match vals.get(m) {
                    Some(v) => {
                        let _ = write!(out, "{v:>8.1}");
                    }
                    None => out.push_str("       -"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CellKey {
    profile: String,
    error: String,
    k: usize,
    method: String,
    lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    hits: usize,
    trials: usize,
    failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Hit,
    Miss,
    Failed,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Hit => {
                self.hits += 1;
                self.trials += 1;
            }
            Outcome::Miss => self.trials += 1,
            Outcome::Failed => self.failures += 1,
        }
    }
}

fn group_seed(master: u64, profile: &str, error: &str) -> u64 {
    derive_seed(master, &[tag::CELL, label_hash(profile), label_hash(error)])
}

fn replicate_seed(group: u64, stream: u64, r: usize) -> u64 {
    derive_seed(group, &[stream, r as u64])
}

fn boot_seed(replicate: u64, k: usize, method: &str) -> u64 {
    derive_seed(replicate, &[tag::BOOTSTRAP, k as u64, label_hash(method)])
}

fn simulate(
    n: usize,
    sigma: &SigmaProfile,
    error: &ErrorModel,
    mean: MeanSpec,
    seed: u64,
) -> Result<TimeSeries<f64>> {
    simgen::generate(&SimModel {
        n,
        mean,
        sigma: sigma.clone(),
        error: error.clone(),
        seed,
    })
}

/// Evaluates `one` for every replicate and reduces the per-cell outcomes in replicate order.
fn tally_replicates<F>(reps: usize, cells: usize, one: F) -> Result<Vec<Tally>>
where
    F: Fn(usize) -> Result<Vec<Outcome>> + Sync,
{
    let per_rep: Vec<Vec<Outcome>> = (0..reps).into_par_iter().map(&one).collect::<Result<_>>()?;
    let mut tallies = vec![Tally::default(); cells];
    for outcomes in per_rep {
        for (t, o) in tallies.iter_mut().zip(outcomes) {
            t.add(o);
        }
    }
    Ok(tallies)
}

fn metadata(spec: &ExperimentSpec, started: Instant) -> ExperimentMetadata {
    ExperimentMetadata {
        spec: spec.clone(),
        master_seed: spec.master_seed,
        wall_time_secs: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn require_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::invalid(format!(
            "spec kind is {:?}, expected {kind:?}",
            spec.kind
        )));
    }
    spec.validate()
}

/// Fraction of replicates whose interval for the (zero) mean covers it.
pub fn run_coverage(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    require_kind(spec, ExperimentKind::Coverage)?;
    let started = Instant::now();
    let methods = spec.ci_methods()?;
    let alpha = spec.alpha();
    let mut cells = Vec::new();
    for (profile_name, profile) in spec.sigma_profiles.iter().zip(spec.profiles()?) {
        for error in spec.errors()? {
            let elabel = error_label(&error);
            let group = group_seed(spec.master_seed, &profile.label(), &elabel);
            let tallies = tally_replicates(
                spec.replications,
                spec.k_values.len() * methods.len(),
                |r| {
                    let rs = replicate_seed(group, tag::REPLICATE, r);
                    let x = simulate(spec.n, &profile, &error, MeanSpec::Constant { mu: 0.0 }, rs)?;
                    let mut out = Vec::with_capacity(spec.k_values.len() * methods.len());
                    for &k in &spec.k_values {
                        for &m in &methods {
                            let seed = boot_seed(rs, k, m.label());
                            out.push(
                                match inference::interval(
                                    m,
                                    &x,
                                    alpha,
                                    k,
                                    spec.bootstrap_samples,
                                    spec.multiplier,
                                    seed,
                                ) {
                                    Ok(ci) if ci.contains(0.0) => Outcome::Hit,
                                    Ok(_) => Outcome::Miss,
                                    Err(_) => Outcome::Failed,
                                },
                            );
                        }
                    }
                    Ok(out)
                },
            )?;
            let mut t = tallies.into_iter();
            for &k in &spec.k_values {
                for &m in &methods {
                    let key = CellKey {
                        profile: profile_name.to_ascii_uppercase(),
                        error: elabel.clone(),
                        k,
                        method: m.label().into(),
                        lambda: None,
                    };
                    cells.push(CellResult::new(
                        &key,
                        t.next().expect("one tally per cell"),
                        None,
                    ));
                }
            }
        }
    }
    Ok(ExperimentResult {
        cells,
        metadata: metadata(spec, started),
    })
}

/// Null rejection rates, each test calibrated by its own bootstrap; rejects when `p <= alpha`.
pub fn run_size(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    require_kind(spec, ExperimentKind::Size)?;
    let started = Instant::now();
    let tests = spec.tests()?;
    let alpha = spec.alpha();
    let mut cells = Vec::new();
    for (profile_name, profile) in spec.sigma_profiles.iter().zip(spec.profiles()?) {
        for error in spec.errors()? {
            let elabel = error_label(&error);
            let group = group_seed(spec.master_seed, &profile.label(), &elabel);
            let tallies =
                tally_replicates(spec.replications, spec.k_values.len() * tests.len(), |r| {
                    let rs = replicate_seed(group, tag::REPLICATE, r);
                    let x = simulate(spec.n, &profile, &error, MeanSpec::Constant { mu: 0.0 }, rs)?;
                    let mut out = Vec::new();
                    for &k in &spec.k_values {
                        for &t in &tests {
                            let seed = boot_seed(rs, k, t.label());
                            out.push(
                                match changepoint::run_test(
                                    t,
                                    &x,
                                    spec.trim,
                                    k,
                                    spec.bootstrap_samples,
                                    spec.multiplier,
                                    seed,
                                ) {
                                    Ok(rep) if rep.p_value <= alpha => Outcome::Hit,
                                    Ok(_) => Outcome::Miss,
                                    Err(_) => Outcome::Failed,
                                },
                            );
                        }
                    }
                    Ok(out)
                })?;
            let mut t = tallies.into_iter();
            for &k in &spec.k_values {
                for &test in &tests {
                    let key = CellKey {
                        profile: profile_name.to_ascii_uppercase(),
                        error: elabel.clone(),
                        k,
                        method: test.label().into(),
                        lambda: None,
                    };
                    cells.push(CellResult::new(
                        &key,
                        t.next().expect("one tally per cell"),
                        None,
                    ));
                }
            }
        }
    }
    Ok(ExperimentResult {
        cells,
        metadata: metadata(spec, started),
    })
}

fn statistic(test: TestKind, x: &TimeSeries<f64>, c: f64, k: usize) -> Result<f64> {
    match test {
        TestKind::SN => changepoint::sn_statistic(x, c, k).map(|s| s.0),
        TestKind::T1 => changepoint::classical_statistic(x, c, k, CusumVariant::T1)
            .map(|s| s.map_or(0.0, |v| v.0)),
        TestKind::T2 => changepoint::classical_statistic(x, c, k, CusumVariant::T2)
            .map(|s| s.map_or(0.0, |v| v.0)),
    }
}

/// Size-adjusted power. Critical values are the `1 - alpha` quantiles of
/// each statistic over `calibration_reps` null series; power runs use
/// separate replicate streams, shared across the lambda grid, and reject
/// when the statistic exceeds the critical value.
pub fn run_power(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    require_kind(spec, ExperimentKind::Power)?;
    let started = Instant::now();
    let tests = spec.tests()?;
    let alpha = spec.alpha();
    let width = spec.k_values.len() * tests.len();
    let mut cells = Vec::new();
    for (profile_name, profile) in spec.sigma_profiles.iter().zip(spec.profiles()?) {
        for error in spec.errors()? {
            let elabel = error_label(&error);
            let group = group_seed(spec.master_seed, &profile.label(), &elabel);
            let stats_for = |x: &TimeSeries<f64>| -> Vec<Option<f64>> {
                let mut v = Vec::with_capacity(width);
                for &k in &spec.k_values {
                    for &t in &tests {
                        v.push(statistic(t, x, spec.trim, k).ok());
                    }
                }
                v
            };

            let null: Vec<Vec<Option<f64>>> = (0..spec.calibration_reps)
                .into_par_iter()
                .map(|r| {
                    let rs = replicate_seed(group, tag::CALIBRATION, r);
                    simulate(spec.n, &profile, &error, MeanSpec::Constant { mu: 0.0 }, rs)
                        .map(|x| stats_for(&x))
                })
                .collect::<Result<_>>()?;
            let critical: Vec<Option<f64>> = (0..width)
                .map(|c| {
                    let mut v: Vec<f64> = null.iter().filter_map(|s| s[c]).collect();
                    if v.is_empty() {
                        return None;
                    }
                    v.sort_by(f64::total_cmp);
                    Some(sorted_quantile(&v, 1.0 - alpha))
                })
                .collect();

            let grid = &spec.lambda_grid;
            let tallies = tally_replicates(spec.replications, grid.len() * width, |r| {
                let rs = replicate_seed(group, tag::REPLICATE, r);
                let mut out = Vec::with_capacity(grid.len() * width);
                for &lambda in grid {
                    let mean = MeanSpec::Step {
                        lambda,
                        change_at: spec.change_at,
                    };
                    let x = simulate(spec.n, &profile, &error, mean, rs)?;
                    for (s, crit) in stats_for(&x).into_iter().zip(&critical) {
                        out.push(match (s, crit) {
                            (Some(s), Some(c)) if s > *c => Outcome::Hit,
                            (Some(_), Some(_)) => Outcome::Miss,
                            _ => Outcome::Failed,
                        });
                    }
                }
                Ok(out)
            })?;
            let mut t = tallies.into_iter();
            let mut block = Vec::new();
            for &lambda in grid {
                let mut c = 0;
                for &k in &spec.k_values {
                    for &test in &tests {
                        let key = CellKey {
                            profile: profile_name.to_ascii_uppercase(),
                            error: elabel.clone(),
                            k,
                            method: test.label().into(),
                            lambda: Some(lambda),
                        };
                        block.push((key, t.next().expect("one tally per cell"), critical[c]));
                        c += 1;
                    }
                }
            }
            // list each (k, test) curve contiguously along the grid
            block.sort_by(|a, b| {
                (a.0.k, &a.0.method)
                    .cmp(&(b.0.k, &b.0.method))
                    .then(a.0.lambda.partial_cmp(&b.0.lambda).expect("finite grid"))
            });
            cells.extend(block.into_iter().map(|(k, t, c)| CellResult::new(&k, t, c)));
        }
    }
    Ok(ExperimentResult {
        cells,
        metadata: metadata(spec, started),
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    match spec.kind {
        ExperimentKind::Coverage => run_coverage(spec),
        ExperimentKind::Size => run_size(spec),
        ExperimentKind::Power => run_power(spec),
    }
}

/// Total squared distance between `rates` and their nondecreasing
/// least-squares fit, relative to the total squared rate. Zero for a
/// monotone curve.
pub fn isotonic_violation(rates: &[f64]) -> f64 {
    // pool-adjacent-violators
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &r in rates {
        blocks.push((r, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().expect("nonempty") =
                ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    let fitted = blocks.iter().flat_map(|&(m, w)| std::iter::repeat_n(m, w));
    let dev: f64 = rates.iter().zip(fitted).map(|(r, f)| (r - f).powi(2)).sum();
    let total: f64 = rates.iter().map(|r| r * r).sum();
    if total > 0.0 {
        dev / total
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind, methods: &[&str]) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(kind, &["A1"], &["B1(0.4)"], &[10], methods);
        s.replications = 40;
        s.bootstrap_samples = 49;
        s.master_seed = 17;
        s
    }

    #[test]
    fn parse_error_specs() {
        assert_eq!(parse_error_spec("iid").unwrap(), ErrorModel::Iid);
        assert_eq!(parse_error_spec("B1(0.4)").unwrap(), ErrorModel::b1(0.4));
        assert_eq!(parse_error_spec("b2:3").unwrap(), ErrorModel::b2(3.0));
        assert!(parse_error_spec("B1(1.5)").is_err());
        assert!(parse_error_spec("B2(x)").is_err());
        assert!(parse_error_spec("B1").is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let s = small(ExperimentKind::Power, &["SN", "T1"]);
        assert_eq!(
            ExperimentSpec::from_toml_str(&s.to_toml_string()).unwrap(),
            s
        );
        let parsed = ExperimentSpec::from_toml_str(
            "kind = \"size\"\nsigma_profiles = [\"A1\"]\nerror_models = [\"B1(0.0)\"]\nk_values = [10]\nmethods = [\"SN\"]\n",
        )
        .unwrap();
        assert_eq!(
            (parsed.n, parsed.replications, parsed.bootstrap_samples),
            (120, 500, 500)
        );
        assert!(ExperimentSpec::from_toml_str("kind = \"size\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn validation() {
        let mut s = small(ExperimentKind::Power, &["SN"]);
        s.lambda_grid = vec![0.5, 1.0];
        assert!(run_power(&s).is_err());
        let mut s = small(ExperimentKind::Power, &["SN"]);
        s.calibration_reps = 10;
        assert!(run_power(&s).is_err());
        let mut s = small(ExperimentKind::Coverage, &["SN"]);
        s.replications = 0;
        assert!(run_coverage(&s).is_err());
        assert!(run_coverage(&small(ExperimentKind::Coverage, &["T1"])).is_err());
        assert!(run_size(&small(ExperimentKind::Coverage, &["SN"])).is_err());
        let mut s = small(ExperimentKind::Coverage, &["SN"]);
        s.k_values = vec![100];
        assert!(run_coverage(&s).is_err());
    }

    #[test]
    fn single_replicate_is_zero_or_one() {
        let mut s = small(ExperimentKind::Coverage, &["SN", "WB", "ST", "BB", "SBB"]);
        s.replications = 1;
        let r = run_coverage(&s).unwrap();
        assert_eq!(r.cells.len(), 5);
        for c in &r.cells {
            assert!(c.rate == 0.0 || c.rate == 1.0);
            assert_eq!(c.se, 0.0);
        }
    }

    #[test]
    fn every_cell_present_with_binomial_se() {
        let mut s = small(ExperimentKind::Coverage, &["SN", "ST"]);
        s.sigma_profiles = vec!["A1".into(), "A3".into()];
        s.error_models = vec!["iid".into(), "B2(3)".into()];
        s.k_values = vec![8, 10];
        let r = run_coverage(&s).unwrap();
        assert_eq!(r.cells.len(), 2 * 2 * 2 * 2);
        for p in ["A1", "A3"] {
            for e in ["iid", "B2(3)"] {
                for k in [8, 10] {
                    for m in ["SN", "ST"] {
                        let c = r.cell(p, e, k, m, None).unwrap();
                        assert!((0.0..=1.0).contains(&c.rate));
                        assert_eq!(c.trials + c.failures, 40);
                        assert_eq!(c.se, (c.rate * (1.0 - c.rate) / c.trials as f64).sqrt());
                    }
                }
            }
        }
        assert!(r.pivot_table().lines().count() == 1 + 8);
    }

    #[test]
    fn deterministic_across_threads() {
        let specs = [
            small(ExperimentKind::Coverage, &["SN", "WB", "SBB"]),
            small(ExperimentKind::Size, &["SN", "T1", "T2"]),
        ];
        for s in &specs {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            let one = pool.install(|| run(s).unwrap());
            let many = run(s).unwrap();
            assert_eq!(one.cells, many.cells);
        }
    }

    #[test]
    fn cell_order_does_not_change_results() {
        let mut a = small(ExperimentKind::Coverage, &["SN", "WB"]);
        a.k_values = vec![8, 10];
        let mut b = a.clone();
        b.methods.reverse();
        b.k_values.reverse();
        let (ra, rb) = (run(&a).unwrap(), run(&b).unwrap());
        for c in &ra.cells {
            assert_eq!(
                rb.cell(&c.profile, &c.error, c.k, &c.method, None).unwrap(),
                c
            );
        }
    }

    #[test]
    fn power_calibration_point() {
        let mut s = small(ExperimentKind::Power, &["SN", "T1"]);
        s.replications = 400;
        s.calibration_reps = 2000;
        s.lambda_grid = vec![0.0, 1.0];
        let r = run_power(&s).unwrap();
        for m in ["SN", "T1"] {
            let c = r.cell("A1", "B1(0.4)", 10, m, Some(0.0)).unwrap();
            let se = (0.05f64 * 0.95 / 400.0).sqrt();
            assert!((c.rate - 0.05).abs() <= 3.0 * se, "{m}: {}", c.rate);
            assert!(r.cell("A1", "B1(0.4)", 10, m, Some(1.0)).unwrap().rate > c.rate);
        }
    }

    #[test]
    fn isotonic_violation_oracle() {
        assert_eq!(isotonic_violation(&[0.1, 0.2, 0.2, 0.9]), 0.0);
        // [0.5, 0.3] pools to 0.4 on both points
        let v = isotonic_violation(&[0.5, 0.3]);
        assert!((v - (0.01 + 0.01) / (0.25 + 0.09)).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_error_shrinks_with_replications() {
        let base = |reps: usize, seed: u64| {
            let mut s =
                ExperimentSpec::new(ExperimentKind::Coverage, &["A1"], &["iid"], &[10], &["ST"]);
            s.replications = reps;
            s.master_seed = seed;
            run_coverage(&s).unwrap().cells[0].rate
        };
        let truth = base(40_000, 999);
        let dev = |reps: usize| {
            let mut d: Vec<f64> = (0..60).map(|s| (base(reps, s) - truth).abs()).collect();
            d.sort_by(f64::total_cmp);
            (d[29] + d[30]) / 2.0
        };
        let ratio = dev(100) / dev(400);
        assert!((1.3..=3.0).contains(&ratio), "{ratio}");
    }
}
