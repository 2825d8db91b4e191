// SPDX-License-Identifier: Apache-2.0

//! Headless benchmarks comparing label propagation with scripted
//! interactive labeling: accuracy against the unlabeled rate, wall-time
//! scaling, reduction methods, and an MNIST labeling and downstream study.
//!
//! Each experiment maps a [`BenchSpec`] to a [`BenchResult`] holding one
//! record per (configuration, seed), aggregates and a few derived headline
//! numbers. Everything except wall-clock fields is a pure function of the spec.

pub mod error;
pub mod experiments;
pub mod report;
pub mod result;
pub mod runs;
pub mod spec;

pub use error::{BenchError, Result};
pub use experiments::{
    run, run_downstream, run_dr_compare, run_lp_accuracy_curve, run_lp_time_scaling, run_mnist_labeling,
};
pub use report::{write_report, write_runs_csv, ReportPaths};
pub use result::{Aggregate, BenchResult, Derived, RunRecord};
pub use spec::{BenchSpec, DrVariant, Experiment};
