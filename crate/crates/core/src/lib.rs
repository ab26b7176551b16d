// SPDX-License-Identifier: MIT OR Apache-2.0

//! Self-normalized inference for time series `X_i = mu + sigma_i e_i` with
//! unknown, time-varying scale `sigma_i` and dependent errors `e_i`.

// `!(x > 0)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
pub mod error;
pub mod harness;
pub mod inference;
pub mod lrv;
pub mod normal;
pub mod regression;
pub mod rng;
pub mod scalar;
pub mod series;
pub mod simgen;

pub use changepoint::{ChangePointReport, CusumScan, CusumVariant, TestKind};
pub use error::{Error, Result};
pub use harness::{ExperimentKind, ExperimentResult, ExperimentSpec};
pub use inference::{
    BootstrapDistribution, CiMethod, CombinationSpec, ConfidenceInterval, MultiplierLaw,
};
pub use lrv::{LongRunEstimate, LrvMethod};
pub use regression::{Coefficient, TrendFit};
pub use scalar::Real;
pub use series::{
    partition, prefix_suffix_scan, segment_stats, BlockPartition, SegmentStats, TimeSeries,
};
pub use simgen::{ErrorModel, MeanSpec, SigmaProfile, SimModel};

pub type TimeSeries64 = TimeSeries<f64>;
pub type TimeSeries32 = TimeSeries<f32>;
pub type LongRunEstimate64 = LongRunEstimate<f64>;
pub type LongRunEstimate32 = LongRunEstimate<f32>;
pub type ConfidenceInterval64 = ConfidenceInterval<f64>;
pub type ConfidenceInterval32 = ConfidenceInterval<f32>;
pub type ChangePointReport64 = ChangePointReport<f64>;
pub type ChangePointReport32 = ChangePointReport<f32>;
pub type CusumScan64 = CusumScan<f64>;
pub type CusumScan32 = CusumScan<f32>;
pub type TrendFit64 = TrendFit<f64>;
pub type TrendFit32 = TrendFit<f32>;
pub type SegmentStats64 = SegmentStats<f64>;
pub type SegmentStats32 = SegmentStats<f32>;
