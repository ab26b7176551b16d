// SPDX-License-Identifier: MIT OR Apache-2.0

//! `selfnorm`: intervals, change-point tests, trend fits and Monte Carlo
//! experiments for series with time-varying variance.

mod commands;
mod error;
mod ingest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{exit, CliError};
use crate::report::{Format, Report};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "selfnorm",
    version,
    about = "Self-normalized inference for time series with time-varying variance"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Output format; defaults to csv when --out ends in .csv and json otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random stream [default: 1].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for bootstrap and simulation loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file with the series.
    pub file: PathBuf,
    /// Value column, by header name or 1-based position.
    #[arg(long)]
    pub col: Option<String>,
    /// Label column used to name change points.
    #[arg(long)]
    pub index_col: Option<String>,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    /// Block length k_n.
    #[arg(short = 'k', long = "blocks")]
    pub blocks: Option<usize>,
    /// Run once per block length, e.g. 12,14,16,18.
    #[arg(long, value_delimiter = ',', conflicts_with = "blocks")]
    pub k_schedule: Vec<usize>,
    /// Choose k_n by simulated mean squared error of tau_hat.
    #[arg(long, conflicts_with_all = ["blocks", "k_schedule"])]
    pub auto_k: bool,
    /// Largest block length searched by --auto-k.
    #[arg(long, default_value_t = 60, requires = "auto_k")]
    pub k_max: usize,
}

#[derive(Debug, Args)]
pub struct BootArgs {
    /// Bootstrap replicates B.
    #[arg(long, default_value_t = selfnorm::inference::DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// Wild-bootstrap multiplier law: rademacher or gaussian.
    #[arg(long, default_value = "rademacher")]
    pub multiplier: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Confidence interval for the mean.
    Ci {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// Interval methods: sn, wb, st, bb, sbb (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "sn")]
        method: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Interval for a weighted sum of segment means.
    CiCombo {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// Last observation of each segment but the final one, e.g. 80,160.
        #[arg(long, value_delimiter = ',', required = true)]
        split: Vec<usize>,
        /// One weight per segment, e.g. 1,-1.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        weights: Vec<f64>,
        /// sn or wb.
        #[arg(long, default_value = "sn")]
        method: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Test for a single change in the mean (or, with --variance, the variance).
    Changepoint {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// sn, t1 or t2.
        #[arg(long, default_value = "sn")]
        test: String,
        /// Trimming fraction c.
        #[arg(long, default_value_t = selfnorm::changepoint::DEFAULT_TRIM)]
        c: f64,
        /// Test the squared deviations for a change in variance.
        #[arg(long)]
        variance: bool,
        /// Also write the scan as CSV columns (k, j, label, value).
        #[arg(long)]
        scan_out: Option<PathBuf>,
    },
    /// Linear trend fit with intervals for intercept and slope.
    Trend {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Blockwise long-run variance estimate.
    Lrv {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        /// selfnorm, stationary or regression.
        #[arg(long, default_value = "selfnorm")]
        method: String,
    },
    /// Simulated block-length selection for i.i.d. Gaussian data.
    SelectK {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = selfnorm::lrv::DEFAULT_SELECT_REPS)]
        reps: usize,
        /// Candidate block lengths; defaults to 4..=n/4 with at least four blocks.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
    },
    /// Generate a synthetic series as CSV (index, value).
    Simulate(commands::SimulateArgs),
    /// Coverage, size or power study.
    Experiment(commands::ExperimentArgs),
}

impl Command {
    fn has_randomness(&self) -> bool {
        !matches!(
            self,
            Command::Trend { .. }
                | Command::Lrv {
                    blocks: BlockArgs { auto_k: false, .. },
                    ..
                }
        )
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(t) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let seed_flag = cli.global.seed;
    let seed = seed_flag.unwrap_or(DEFAULT_SEED);
    let randomness = cli.command.has_randomness();
    let mut default_format = Format::Json;
    let (out, inputs) = match cli.command {
        Command::Ci {
            input,
            blocks,
            boot,
            method,
            alpha,
        } => commands::ci(&input, &blocks, &boot, &method, alpha, seed)?,
        Command::CiCombo {
            input,
            blocks,
            boot,
            split,
            weights,
            method,
            alpha,
        } => commands::ci_combo(
            &input, &blocks, &boot, &split, &weights, &method, alpha, seed,
        )?,
        Command::Changepoint {
            input,
            blocks,
            boot,
            test,
            c,
            variance,
            scan_out,
        } => commands::changepoint(
            &input,
            &blocks,
            &boot,
            &test,
            c,
            variance,
            scan_out.as_deref(),
            seed,
        )?,
        Command::Trend {
            input,
            blocks,
            alpha,
        } => commands::trend(&input, &blocks, alpha, seed)?,
        Command::Lrv {
            input,
            blocks,
            method,
        } => commands::lrv(&input, &blocks, &method, seed)?,
        Command::SelectK { n, reps, grid } => (commands::select_k(n, reps, &grid, seed)?, None),
        Command::Simulate(args) => {
            default_format = Format::Csv;
            let (out, used) = commands::simulate(&args, seed_flag)?;
            let report = Report {
                command: argv,
                version: env!("CARGO_PKG_VERSION"),
                seed: Some(used),
                inputs: None,
                results: out.results,
                wall_time_secs: started.elapsed().as_secs_f64(),
            };
            let format = pick_format(cli.global.format, cli.global.out.as_deref(), default_format);
            return report::emit(
                &report,
                &out.table,
                out.text.as_deref(),
                format,
                cli.global.out.as_deref(),
            );
        }
        Command::Experiment(args) => (commands::experiment(&args, seed_flag)?, None),
    };
    let report = Report {
        command: argv,
        version: env!("CARGO_PKG_VERSION"),
        seed: randomness.then_some(seed),
        inputs,
        results: out.results,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let format = pick_format(cli.global.format, cli.global.out.as_deref(), default_format);
    report::emit(
        &report,
        &out.table,
        out.text.as_deref(),
        format,
        cli.global.out.as_deref(),
    )
}

fn pick_format(flag: Option<Format>, out: Option<&std::path::Path>, fallback: Format) -> Format {
    flag.unwrap_or_else(
        || match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => fallback,
        },
    )
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    match run(cli, argv) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("selfnorm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
