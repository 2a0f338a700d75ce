//! Change-point detection in time series by direct density-ratio
//! estimation between adjacent windows.
//!
//! A detector slides a reference window and a test window over the series,
//! fits one of five ratio estimators (kernel RuLSIF, boosted trees, neural
//! networks, or probabilistic classifiers) and turns the fitted model into a
//! symmetric dissimilarity score.

// `!(x > 0.0)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod datasets;
pub mod detector;
pub mod dissimilarity;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod exec;
pub mod kernel;
pub mod nn;
pub mod rng;
pub mod timeseries;
pub mod trees;

pub use benchmark::{run_benchmark, write_benchmark_csv, BenchmarkPlan, BenchmarkRow};
pub use datasets::{DatasetId, LabeledSeries, SyntheticSpec};
pub use detector::{detect, detect_with, threshold_alarms, AlarmList, DetectorConfig, Scaling, ScoreSeries};
pub use dissimilarity::ScoreKind;
pub use error::{CpdError, Result};
pub use estimator::{EstimatorKind, EstimatorParams};
pub use evaluation::{align, roc_auc, roc_auc_exact};
pub use exec::Execution;
pub use timeseries::{Rows, TimeSeries};
