// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use pvil_core::metrics::EvalReport;

use crate::spec::BenchSpec;

/// One (configuration, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: String,
    pub method: String,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    /// Deterministic outcomes.
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock seconds.
    pub timings: BTreeMap<String, f64>,
    pub report: Option<EvalReport>,
    /// Why the run did not execute, if it did not.
    pub skipped: Option<String>,
}

impl RunRecord {
    pub fn new(config: impl Into<String>, method: impl Into<String>, seed: u64) -> Self {
        Self {
            config: config.into(),
            method: method.into(),
            seed,
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            report: None,
            skipped: None,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn timing(&self, key: &str) -> Option<f64> {
        self.timings.get(key).copied()
    }
}

/// Median, minimum and maximum of one quantity over the seeds of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: String,
    pub quantity: String,
    pub timing: bool,
    pub count: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// A headline number computed from the runs, such as a slope or a best-of-grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub name: String,
    pub value: f64,
    /// Configuration the value refers to, when it picks one.
    pub config: Option<String>,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub spec: BenchSpec,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    pub derived: Vec<Derived>,
}

impl BenchResult {
    pub fn new(spec: BenchSpec, runs: Vec<RunRecord>) -> Self {
        let aggregates = aggregate(&runs);
        Self {
            spec,
            runs,
            aggregates,
            derived: Vec::new(),
        }
    }

    pub fn derive(&mut self, name: impl Into<String>, value: f64, config: Option<String>, timing: bool) {
        self.derived.push(Derived {
            name: name.into(),
            value,
            config,
            timing,
        });
    }

    pub fn derived(&self, name: &str) -> Option<&Derived> {
        self.derived.iter().find(|d| d.name == name)
    }

    pub fn aggregate(&self, config: &str, quantity: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.config == config && a.quantity == quantity)
    }

    pub fn runs_of<'a>(&'a self, config: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.config == config)
    }

    /// Copy with every wall-clock quantity removed; two runs of the same spec
    /// agree exactly on what remains.
    pub fn without_timings(&self) -> BenchResult {
        let mut out = self.clone();
        for r in &mut out.runs {
            r.timings.clear();
            if let Some(rep) = &mut r.report {
                rep.wall_times.clear();
            }
        }
        out.aggregates.retain(|a| !a.timing);
        out.derived.retain(|d| !d.timing);
        out
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    match values.len() {
        0 => f64::NAN,
        m if m % 2 == 1 => values[m / 2],
        m => 0.5 * (values[m / 2 - 1] + values[m / 2]),
    }
}

/// Aggregates every metric and timing per configuration, in first-seen
/// configuration order. Skipped runs are left out.
pub fn aggregate(runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut configs: Vec<&str> = Vec::new();
    for r in runs {
        if !configs.contains(&r.config.as_str()) {
            configs.push(&r.config);
        }
    }
    let mut out = Vec::new();
    for config in configs {
        let rows: Vec<&RunRecord> = runs.iter().filter(|r| r.config == config && r.skipped.is_none()).collect();
        for timing in [false, true] {
            let keys: BTreeSet<&String> = rows
                .iter()
                .flat_map(|r| if timing { r.timings.keys() } else { r.metrics.keys() })
                .collect();
            for key in keys {
                let mut v: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| if timing { r.timings.get(key) } else { r.metrics.get(key) })
                    .copied()
                    .collect();
                let med = median(&mut v);
                out.push(Aggregate {
                    config: config.to_string(),
                    quantity: key.clone(),
                    timing,
                    count: v.len(),
                    median: med,
                    min: v[0],
                    max: v[v.len() - 1],
                });
            }
        }
    }
    out
}
