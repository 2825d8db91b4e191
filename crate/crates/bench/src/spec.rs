// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use pvil_core::embed::{IsomapParams, TsneParams};
use pvil_core::logistic::LogisticParams;
use pvil_session::oracle::AnnotatorPolicy;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LpAccuracyCurve,
    LpTimeScaling,
    DrCompare,
    MnistLabeling,
    Downstream,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::LpAccuracyCurve,
        Experiment::LpTimeScaling,
        Experiment::DrCompare,
        Experiment::MnistLabeling,
        Experiment::Downstream,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LpAccuracyCurve => "lp_accuracy_curve",
            Experiment::LpTimeScaling => "lp_time_scaling",
            Experiment::DrCompare => "dr_compare",
            Experiment::MnistLabeling => "mnist_labeling",
            Experiment::Downstream => "downstream",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let known: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            BenchError::InvalidSpec(format!("unknown experiment '{s}' (known: {})", known.join(", ")))
        })
    }
}

/// View-building strategies compared by `dr_compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrVariant {
    /// One PCA view, no reprojection.
    PcaOnce,
    Isomap,
    Tsne,
    /// PCA root view with PCA reprojection of impure regions.
    MdrTwicePca,
}

impl DrVariant {
    pub fn name(self) -> &'static str {
        match self {
            DrVariant::PcaOnce => "pca_once",
            DrVariant::Isomap => "isomap",
            DrVariant::Tsne => "tsne",
            DrVariant::MdrTwicePca => "mdr_twice_pca",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub experiment: Experiment,
    /// Generator name, or "mnist".
    pub dataset: String,
    /// Total sample count for generated datasets.
    pub n: usize,
    pub noise: Option<f64>,
    /// Sample counts timed by `lp_time_scaling`.
    pub sizes: Vec<usize>,
    /// Sample counts at which `lp_time_scaling` counts annotator steps.
    pub step_sizes: Vec<usize>,
    /// MNIST subset size.
    pub subset: usize,
    /// MNIST held-out size for `downstream`.
    pub holdout: usize,
    pub mnist_dir: Option<PathBuf>,
    pub r_unlabeled: Vec<f64>,
    pub lp_k: Vec<usize>,
    pub lp_lambda: Vec<f64>,
    pub methods: Vec<DrVariant>,
    pub isomap: IsomapParams,
    pub tsne: TsneParams,
    pub eta: f64,
    pub policy: AnnotatorPolicy,
    pub logistic: LogisticParams,
    pub seeds: Vec<u64>,
    /// A size level whose estimated working set exceeds this is skipped.
    pub memory_budget_mb: f64,
    /// Fast timings are repeated until they add up to this, keeping the minimum.
    pub min_timing_seconds: f64,
    pub output: Option<PathBuf>,
}

const SWEEP: [f64; 6] = [0.5, 0.8, 0.9, 0.95, 0.99, 0.995];

impl BenchSpec {
    /// Default spec for an experiment; also the base that spec files override.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = BenchSpec {
            experiment,
            dataset: "two_moons".into(),
            n: 200,
            noise: None,
            sizes: vec![100, 1_000, 10_000],
            step_sizes: vec![1_000, 10_000, 100_000],
            subset: 2_000,
            holdout: 2_000,
            mnist_dir: None,
            r_unlabeled: vec![0.995],
            lp_k: vec![5, 10, 20],
            lp_lambda: vec![0.9, 0.99],
            methods: vec![DrVariant::PcaOnce, DrVariant::Isomap, DrVariant::Tsne, DrVariant::MdrTwicePca],
            isomap: IsomapParams { k: 10, bridge: true },
            tsne: TsneParams::default(),
            eta: 0.85,
            policy: AnnotatorPolicy::default(),
            logistic: LogisticParams::default(),
            seeds: (0..5).collect(),
            memory_budget_mb: 2048.0,
            min_timing_seconds: 0.25,
            output: None,
        };
        match experiment {
            Experiment::LpAccuracyCurve => BenchSpec {
                r_unlabeled: SWEEP.to_vec(),
                seeds: (0..20).collect(),
                ..base
            },
            Experiment::LpTimeScaling => BenchSpec {
                r_unlabeled: vec![0.99],
                seeds: (0..3).collect(),
                ..base
            },
            Experiment::DrCompare => BenchSpec {
                dataset: "four_gaussians".into(),
                n: 4_800,
                ..base
            },
            Experiment::MnistLabeling | Experiment::Downstream => BenchSpec {
                dataset: "mnist".into(),
                n: 0,
                ..base
            },
        }
    }

    /// Parses a JSON spec. Only `experiment` is required; every other field
    /// falls back to that experiment's defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(fields) = value else {
            return Err(BenchError::InvalidSpec("spec must be a JSON object".into()));
        };
        let experiment: Experiment = match fields.get("experiment") {
            Some(serde_json::Value::String(s)) => s.parse()?,
            _ => return Err(BenchError::InvalidSpec("missing string field 'experiment'".into())),
        };
        let serde_json::Value::Object(mut merged) = serde_json::to_value(Self::defaults(experiment))? else {
            unreachable!("a struct serializes to an object");
        };
        merged.extend(fields);
        let spec: BenchSpec = serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.r_unlabeled.is_empty() {
            return bad("r_unlabeled must list at least one rate".into());
        }
        if let Some(r) = self.r_unlabeled.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return bad(format!("unlabeled rate {r} must lie in [0, 1)"));
        }
        let uses_lp = matches!(
            self.experiment,
            Experiment::LpAccuracyCurve | Experiment::LpTimeScaling | Experiment::MnistLabeling
        );
        if uses_lp {
            if self.lp_k.is_empty() || self.lp_lambda.is_empty() {
                return bad("LP grid needs at least one k and one lambda".into());
            }
            if self.lp_k.contains(&0) {
                return bad("LP k must be positive".into());
            }
            if let Some(l) = self.lp_lambda.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
                return bad(format!("LP lambda {l} must lie in (0, 1)"));
            }
        }
        match self.experiment {
            Experiment::LpTimeScaling if self.sizes.is_empty() && self.step_sizes.is_empty() => {
                return bad("lp_time_scaling needs sizes or step_sizes".into());
            }
            Experiment::DrCompare if self.methods.is_empty() => {
                return bad("dr_compare needs at least one method".into());
            }
            Experiment::MnistLabeling | Experiment::Downstream if self.subset < 10 => {
                return bad(format!("subset of {} is too small", self.subset));
            }
            Experiment::Downstream if self.holdout == 0 => {
                return bad("downstream needs a non-empty holdout".into());
            }
            _ => {}
        }
        if !(self.memory_budget_mb > 0.0) {
            return bad("memory_budget_mb must be positive".into());
        }
        if !(self.min_timing_seconds >= 0.0) {
            return bad("min_timing_seconds must be non-negative".into());
        }
        self.policy.validate()?;
        Ok(())
    }

    pub fn lp_grid(&self) -> Vec<(usize, f64)> {
        self.lp_k
            .iter()
            .flat_map(|&k| self.lp_lambda.iter().map(move |&l| (k, l)))
            .collect()
    }

    /// Configurations run per seed; a result holds `seeds × grid_size` runs.
    pub fn grid_size(&self) -> usize {
        let lp = self.lp_k.len() * self.lp_lambda.len();
        match self.experiment {
            Experiment::LpAccuracyCurve | Experiment::MnistLabeling => self.r_unlabeled.len() * (lp + 1),
            Experiment::LpTimeScaling => self.sizes.len() * lp + self.step_sizes.len(),
            Experiment::DrCompare => self.methods.len(),
            Experiment::Downstream => self.r_unlabeled.len() * 2,
        }
    }
}

/// Seed for the labeled/unlabeled split, kept apart from the data seed.
pub fn split_seed(seed: u64) -> u64 {
    seed.wrapping_add(100)
}
