// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use selfnorm::changepoint::{self, CusumScan, TestKind};
use selfnorm::harness::{self, ExperimentKind, ExperimentSpec};
use selfnorm::inference::{self, CiMethod, CombinationSpec, ConfidenceInterval, MultiplierLaw};
use selfnorm::lrv::{self, BlockLengthSelection, LongRunEstimate};
use selfnorm::regression::{self, Coefficient};
use selfnorm::simgen::{self, ModelConfig};
use selfnorm::TimeSeries;

use crate::error::CliError;
use crate::ingest::{ingest_csv, DataFrameIn, IngestOptions, InputDigest};
use crate::report::{num, Output, Table};
use crate::{BlockArgs, BootArgs, InputArgs, DEFAULT_SEED};

type Outcome = (Output, Option<InputDigest>);

fn load(input: &InputArgs) -> Result<(DataFrameIn, TimeSeries<f64>), CliError> {
    let df = ingest_csv(
        &input.file,
        &IngestOptions {
            value: input.col.as_deref(),
            index: input.index_col.as_deref(),
            no_header: input.no_header,
        },
    )?;
    let x = TimeSeries::new(df.values.clone())?;
    Ok((df, x))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse<T: std::str::FromStr<Err = selfnorm::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(CliError::Core)
}

/// Block lengths to run, plus the selection table when `--auto-k` chose them.
fn block_lengths(
    b: &BlockArgs,
    n: usize,
    seed: u64,
) -> Result<(Vec<usize>, Option<BlockLengthSelection>), CliError> {
    if b.auto_k {
        let grid: Vec<usize> = lrv::default_k_grid(n)
            .into_iter()
            .filter(|&k| k <= b.k_max)
            .collect();
        if grid.is_empty() {
            return Err(CliError::Core(selfnorm::Error::InsufficientBlocks {
                n,
                k: 4,
            }));
        }
        let sel = lrv::select_block_length(n, &grid, lrv::DEFAULT_SELECT_REPS, seed)?;
        return Ok((vec![sel.k_star], Some(sel)));
    }
    if !b.k_schedule.is_empty() {
        return Ok((b.k_schedule.clone(), None));
    }
    match b.blocks {
        Some(k) => Ok((vec![k], None)),
        None => Err(usage(
            "one of --blocks, --k-schedule or --auto-k is required",
        )),
    }
}

#[derive(Serialize)]
struct Runs<R> {
    runs: Vec<R>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_length_selection: Option<BlockLengthSelection>,
}

fn ci_row(t: &mut Table, ci: &ConfidenceInterval<f64>) {
    t.push(vec![
        ci.k_n.to_string(),
        ci.method.label().to_string(),
        num(ci.point),
        num(ci.lower),
        num(ci.upper),
        num(ci.level),
        num(ci.tau_hat),
    ]);
}

const CI_HEADERS: [&str; 7] = ["k", "method", "point", "lower", "upper", "level", "tau_hat"];

pub fn ci(
    input: &InputArgs,
    blocks: &BlockArgs,
    boot: &BootArgs,
    methods: &[String],
    alpha: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (df, x) = load(input)?;
    let methods: Vec<CiMethod> = methods.iter().map(|m| parse(m)).collect::<Result<_, _>>()?;
    let law: MultiplierLaw = parse(&boot.multiplier)?;
    let (ks, selection) = block_lengths(blocks, x.len(), seed)?;
    let mut runs = Vec::new();
    let mut table = Table::new(&CI_HEADERS);
    for &k in &ks {
        for &m in &methods {
            let ci = inference::interval(m, &x, alpha, k, boot.bootstrap, law, seed)?;
            ci_row(&mut table, &ci);
            runs.push(ci);
        }
    }
    Ok((
        Output::new(
            &Runs {
                runs,
                block_length_selection: selection,
            },
            table,
        )?,
        Some(df.digest()),
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn ci_combo(
    input: &InputArgs,
    blocks: &BlockArgs,
    boot: &BootArgs,
    split: &[usize],
    weights: &[f64],
    method: &str,
    alpha: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (df, x) = load(input)?;
    let method: CiMethod = parse(method)?;
    if !matches!(method, CiMethod::SN | CiMethod::WB) {
        return Err(usage("ci-combo supports --method sn or wb"));
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(split);
    bounds.push(x.len());
    if bounds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage(format!(
            "--split must be increasing and below n = {}",
            x.len()
        )));
    }
    let segments = bounds
        .windows(2)
        .map(|w| TimeSeries::new(x[w[0]..w[1]].to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = CombinationSpec::new(segments, weights.to_vec())?;
    let (ks, selection) = block_lengths(blocks, x.len(), seed)?;
    let law: MultiplierLaw = parse(&boot.multiplier)?;
    let mut runs = Vec::new();
    let mut table = Table::new(&CI_HEADERS);
    for &k in &ks {
        let ci = match method {
            CiMethod::WB => inference::combo_wb_ci(&spec, alpha, k, boot.bootstrap, law, seed)?.0,
            _ => inference::combo_ci(&spec, alpha, k)?,
        };
        ci_row(&mut table, &ci);
        runs.push(ci);
    }
    Ok((
        Output::new(
            &Runs {
                runs,
                block_length_selection: selection,
            },
            table,
        )?,
        Some(df.digest()),
    ))
}

#[derive(Serialize)]
struct ChangeRun {
    k: usize,
    test: TestKind,
    variance: bool,
    statistic: f64,
    j_hat: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_hat_label: Option<String>,
    p_value: f64,
    tau_hat: f64,
    bootstrap_samples: usize,
    scan: CusumScan<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn changepoint(
    input: &InputArgs,
    blocks: &BlockArgs,
    boot: &BootArgs,
    test: &str,
    c: f64,
    variance: bool,
    scan_out: Option<&Path>,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (df, x) = load(input)?;
    let test: TestKind = parse(test)?;
    let law: MultiplierLaw = parse(&boot.multiplier)?;
    let series = if variance {
        changepoint::variance_transform(&x)?
    } else {
        x
    };
    let (ks, selection) = block_lengths(blocks, series.len(), seed)?;
    let mut runs = Vec::new();
    let mut table = Table::new(&[
        "k",
        "test",
        "statistic",
        "j_hat",
        "label",
        "p_value",
        "tau_hat",
    ]);
    let mut scan = Table::new(&["k", "j", "label", "value"]);
    for &k in &ks {
        let r = changepoint::run_test(test, &series, c, k, boot.bootstrap, law, seed)?;
        let label = df.label(r.j_hat);
        table.push(vec![
            k.to_string(),
            test.label().into(),
            num(r.statistic),
            r.j_hat.to_string(),
            label.clone().unwrap_or_default(),
            num(r.p_value),
            num(r.tau_hat),
        ]);
        for (i, v) in r.scan.values.iter().enumerate() {
            let j = r.scan.j_first + i;
            scan.push(vec![
                k.to_string(),
                j.to_string(),
                df.label(j).unwrap_or_default(),
                num(*v),
            ]);
        }
        runs.push(ChangeRun {
            k,
            test,
            variance,
            statistic: r.statistic,
            j_hat: r.j_hat,
            j_hat_label: label,
            p_value: r.p_value,
            tau_hat: r.tau_hat,
            bootstrap_samples: r.bootstrap.b,
            scan: r.scan,
        });
    }
    if let Some(p) = scan_out {
        crate::report::emit_table(&scan, p)?;
    }
    Ok((
        Output::new(
            &Runs {
                runs,
                block_length_selection: selection,
            },
            table,
        )?,
        Some(df.digest()),
    ))
}

#[derive(Serialize)]
struct ResidualDiagnostics {
    css: f64,
    sd: f64,
    min: f64,
    max: f64,
    lag1_autocorrelation: f64,
    v_n0_sq: f64,
    v_n1_sq: f64,
}

#[derive(Serialize)]
struct TrendRun {
    k: usize,
    tau_sq_hat: f64,
    beta0: ConfidenceInterval<f64>,
    beta1: ConfidenceInterval<f64>,
}

#[derive(Serialize)]
struct TrendResults {
    beta0_hat: f64,
    beta1_hat: f64,
    residuals: ResidualDiagnostics,
    runs: Vec<TrendRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_length_selection: Option<BlockLengthSelection>,
}

pub fn trend(
    input: &InputArgs,
    blocks: &BlockArgs,
    alpha: f64,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (df, x) = load(input)?;
    let fit = regression::fit_trend(&x)?;
    let (ks, selection) = block_lengths(blocks, x.len(), seed)?;
    let r = &fit.residuals;
    let n = r.len() as f64;
    let css: f64 = r.iter().map(|v| v * v).sum();
    let lag1 = if css > 0.0 {
        r.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / css
    } else {
        0.0
    };
    let diagnostics = ResidualDiagnostics {
        css,
        sd: (css / (n - 2.0).max(1.0)).sqrt(),
        min: r.iter().copied().fold(f64::INFINITY, f64::min),
        max: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lag1_autocorrelation: lag1,
        v_n0_sq: fit.v_n0_sq,
        v_n1_sq: fit.v_n1_sq,
    };
    let mut runs = Vec::new();
    let mut table = Table::new(&[
        "k",
        "coefficient",
        "estimate",
        "lower",
        "upper",
        "level",
        "tau_hat",
    ]);
    for &k in &ks {
        let tau_sq_hat = regression::regression_lrv(&fit, k)?.tau_sq_hat;
        let beta0 = regression::trend_ci(&fit, Coefficient::Beta0, alpha, k)?;
        let beta1 = regression::trend_ci(&fit, Coefficient::Beta1, alpha, k)?;
        for (name, ci) in [("beta0", &beta0), ("beta1", &beta1)] {
            table.push(vec![
                k.to_string(),
                name.into(),
                num(ci.point),
                num(ci.lower),
                num(ci.upper),
                num(ci.level),
                num(ci.tau_hat),
            ]);
        }
        runs.push(TrendRun {
            k,
            tau_sq_hat,
            beta0,
            beta1,
        });
    }
    let results = TrendResults {
        beta0_hat: fit.beta0_hat,
        beta1_hat: fit.beta1_hat,
        residuals: diagnostics,
        runs,
        block_length_selection: selection,
    };
    Ok((Output::new(&results, table)?, Some(df.digest())))
}

pub fn lrv(
    input: &InputArgs,
    blocks: &BlockArgs,
    method: &str,
    seed: u64,
) -> Result<Outcome, CliError> {
    let (df, x) = load(input)?;
    let (ks, selection) = block_lengths(blocks, x.len(), seed)?;
    let fit = if method.eq_ignore_ascii_case("regression") {
        Some(regression::fit_trend(&x)?)
    } else {
        None
    };
    let mut runs: Vec<LongRunEstimate<f64>> = Vec::new();
    let mut table = Table::new(&["k", "method", "tau_sq_hat", "tau_hat", "blocks"]);
    for &k in &ks {
        let est = match (method.to_ascii_lowercase().as_str(), &fit) {
            ("selfnorm" | "sn", _) => lrv::lrv_selfnorm(&x, k)?,
            ("stationary" | "st", _) => lrv::lrv_stationary(&x, k)?,
            ("regression", Some(f)) => regression::regression_lrv(f, k)?,
            (other, _) => return Err(usage(format!("unknown --method '{other}'"))),
        };
        table.push(vec![
            k.to_string(),
            format!("{:?}", est.method),
            num(est.tau_sq_hat),
            num(est.tau_hat()),
            est.l_n.to_string(),
        ]);
        runs.push(est);
    }
    Ok((
        Output::new(
            &Runs {
                runs,
                block_length_selection: selection,
            },
            table,
        )?,
        Some(df.digest()),
    ))
}

pub fn select_k(n: usize, reps: usize, grid: &[usize], seed: u64) -> Result<Output, CliError> {
    let grid = if grid.is_empty() {
        lrv::default_k_grid(n)
    } else {
        grid.to_vec()
    };
    let sel = lrv::select_block_length(n, &grid, reps, seed)?;
    let mut table = Table::new(&["k", "mse", "note"]);
    for row in &sel.table {
        table.push(vec![
            row.k.to_string(),
            row.mse.map(num).unwrap_or_default(),
            row.note.clone().unwrap_or_default(),
        ]);
    }
    let mut out = Output::new(&sel, table)?;
    let mut text = format!("n = {}, reps = {}, k* = {}\n", sel.n, sel.reps, sel.k_star);
    for row in &sel.table {
        let mark = if row.k == sel.k_star { " *" } else { "" };
        match row.mse {
            Some(m) => text.push_str(&format!("{:>6}  {m:.6}{mark}\n", row.k)),
            None => text.push_str(&format!(
                "{:>6}  -  {}\n",
                row.k,
                row.note.as_deref().unwrap_or("")
            )),
        }
    }
    out.text = Some(text);
    Ok(out)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML model file; replaces the model flags below.
    #[arg(long, conflicts_with_all = ["n", "profile", "sigma", "error", "theta", "beta", "mu", "lambda", "change_at"])]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    /// Variance profile: A1, A2, A3, A4 or constant.
    #[arg(long, default_value = "constant")]
    pub profile: String,
    /// Scale for the constant profile.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Error process: iid, b1 or b2.
    #[arg(long, default_value = "iid")]
    pub error: String,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu: f64,
    /// Mean shift added after observation --change-at.
    #[arg(long, allow_hyphen_values = true, requires = "change_at")]
    pub lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    pub change_at: Option<usize>,
}

#[derive(Serialize)]
struct Simulated {
    model: ModelConfig,
    values: Vec<f64>,
}

pub fn simulate(args: &SimulateArgs, seed_flag: Option<u64>) -> Result<(Output, u64), CliError> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            ModelConfig::from_toml_str(&text)?
        }
        None => ModelConfig {
            n: args.n.expect("clap enforces --n"),
            profile: args.profile.clone(),
            sigma: args.sigma,
            error: args.error.clone(),
            theta: args.theta,
            beta: args.beta,
            burn_in: args.burn_in,
            truncation: args.truncation,
            mu: args.mu,
            lambda: args.lambda,
            change_at: args.change_at,
            seed: DEFAULT_SEED,
        },
    };
    if let Some(s) = seed_flag {
        cfg.seed = s;
    }
    if args.config.is_some() {
        if let Some(b) = args.burn_in {
            cfg.burn_in = Some(b);
        }
        if let Some(t) = args.truncation {
            cfg.truncation = Some(t);
        }
    }
    let x = simgen::generate(&cfg.to_model()?)?;
    let mut table = Table::new(&["index", "value"]);
    for (i, v) in x.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), num(*v)]);
    }
    let seed = cfg.seed;
    Ok((
        Output::new(
            &Simulated {
                model: cfg,
                values: x.into_vec(),
            },
            table,
        )?,
        seed,
    ))
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// coverage, size or power; read from --config when omitted.
    #[arg(long, required_unless_present = "config")]
    pub kind: Option<String>,
    /// TOML experiment spec.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replications R.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Bootstrap replicates B.
    #[arg(long)]
    pub boot: Option<usize>,
    /// Null simulations used to calibrate power.
    #[arg(long)]
    pub calibration: Option<usize>,
    /// R = B = 1000 and 10000 calibration runs.
    #[arg(long)]
    pub full_scale: bool,
}

/// The full grid for each study.
fn default_spec(kind: ExperimentKind) -> ExperimentSpec {
    let profiles = ["A1", "A2", "A3", "A4"];
    let errors = ["B1(0)", "B1(0.4)", "B1(0.8)", "B2(4)", "B2(3)", "B2(2.1)"];
    match kind {
        ExperimentKind::Coverage => ExperimentSpec::new(
            kind,
            &profiles,
            &errors,
            &[8, 10, 12],
            &["SN", "WB", "ST", "BB", "SBB"],
        ),
        ExperimentKind::Size => {
            ExperimentSpec::new(kind, &profiles, &errors, &[10], &["SN", "T1", "T2"])
        }
        ExperimentKind::Power => ExperimentSpec::new(
            kind,
            &profiles,
            &["B1(0.4)", "B2(3)"],
            &[10],
            &["SN", "T1", "T2"],
        ),
    }
}

pub fn experiment(args: &ExperimentArgs, seed_flag: Option<u64>) -> Result<Output, CliError> {
    let mut spec = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            ExperimentSpec::from_toml_str(&text)?
        }
        None => {
            let mut s = default_spec(parse(args.kind.as_deref().expect("clap enforces --kind"))?);
            s.master_seed = DEFAULT_SEED;
            s
        }
    };
    if let Some(k) = &args.kind {
        let kind: ExperimentKind = parse(k)?;
        if kind != spec.kind {
            return Err(usage(format!("--kind {k} disagrees with the config file")));
        }
    }
    if spec.kind == ExperimentKind::Power && spec.lambda_grid.is_empty() {
        spec.lambda_grid = harness::default_lambda_grid();
    }
    if args.full_scale {
        spec.replications = 1000;
        spec.bootstrap_samples = 1000;
        spec.calibration_reps = 10_000;
    }
    if let Some(r) = args.reps {
        spec.replications = r;
    }
    if let Some(b) = args.boot {
        spec.bootstrap_samples = b;
    }
    if let Some(c) = args.calibration {
        spec.calibration_reps = c;
    }
    if let Some(s) = seed_flag {
        spec.master_seed = s;
    }
    let result = harness::run(&spec)?;
    let mut table = Table::new(&[
        "profile",
        "error",
        "k",
        "method",
        "lambda",
        "rate",
        "se",
        "hits",
        "trials",
        "failures",
        "critical_value",
    ]);
    for c in &result.cells {
        table.push(vec![
            c.profile.clone(),
            c.error.clone(),
            c.k.to_string(),
            c.method.clone(),
            c.lambda.map(num).unwrap_or_default(),
            num(c.rate),
            num(c.se),
            c.hits.to_string(),
            c.trials.to_string(),
            c.failures.to_string(),
            c.critical_value.map(num).unwrap_or_default(),
        ]);
    }
    let mut out = Output::new(&result, table)?;
    out.text = Some(result.pivot_table());
    Ok(out)
}
