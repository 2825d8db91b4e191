// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use proptest::prelude::*;

use pvil_bench::experiments::{load_mnist, lp_working_set_bytes, mnist_partition};
use pvil_bench::result::{aggregate, median};
use pvil_bench::runs::{loglog_slope, timed};
use pvil_bench::{run, write_report, BenchError, BenchResult, BenchSpec, Experiment, RunRecord};

fn small_curve() -> BenchSpec {
    let mut s = BenchSpec::defaults(Experiment::LpAccuracyCurve);
    s.seeds = vec![0, 1];
    s.r_unlabeled = vec![0.9, 0.99];
    s.lp_k = vec![5, 10];
    s.lp_lambda = vec![0.99];
    s
}

#[test]
fn spec_files_override_experiment_defaults() {
    let s = BenchSpec::from_json(r#"{"experiment": "dr_compare", "seeds": [7], "methods": ["pca_once", "tsne"]}"#).unwrap();
    assert_eq!(s.experiment, Experiment::DrCompare);
    assert_eq!(s.seeds, vec![7]);
    assert_eq!(s.n, 4800);
    assert_eq!(s.dataset, "four_gaussians");
    assert_eq!(s.r_unlabeled, vec![0.995]);
    assert_eq!(s.grid_size(), 2);

    let s = BenchSpec::from_json(r#"{"experiment": "lp_accuracy_curve", "policy": {"min_group": 7}}"#).unwrap();
    assert_eq!(s.seeds.len(), 20);
    assert_eq!(s.r_unlabeled, vec![0.5, 0.8, 0.9, 0.95, 0.99, 0.995]);
    assert_eq!(s.policy.min_group, 7);
    assert_eq!(s.policy.link_radius_factor, 3.0);
    assert_eq!(s.grid_size(), 6 * 7);
}

#[test]
fn malformed_specs_are_refused() {
    for text in [
        r#"{"seeds": [1]}"#,
        r#"{"experiment": "fig9"}"#,
        r#"{"experiment": "dr_compare", "seeds": []}"#,
        r#"{"experiment": "dr_compare", "sedes": [1]}"#,
        r#"{"experiment": "lp_accuracy_curve", "r_unlabeled": [1.0]}"#,
        r#"{"experiment": "lp_accuracy_curve", "lp_lambda": [1.5]}"#,
        r#"{"experiment": "lp_time_scaling", "memory_budget_mb": 0}"#,
        r#"{"experiment": "dr_compare", "policy": {"min_group": 1}}"#,
        r#"[1, 2]"#,
    ] {
        assert!(BenchSpec::from_json(text).is_err(), "{text}");
    }
    let err = "fig9".parse::<Experiment>().unwrap_err().to_string();
    assert!(err.contains("lp_accuracy_curve") && err.contains("downstream"), "{err}");
}

#[test]
fn run_count_is_seeds_times_grid_and_aggregates_recompute() {
    let spec = small_curve();
    let res = run(&spec).unwrap();
    assert_eq!(res.runs.len(), spec.seeds.len() * spec.grid_size());
    assert_eq!(res.aggregates, aggregate(&res.runs));
    // Independent recomputation for one configuration.
    let mut f1: Vec<f64> = res.runs_of("pvil r=0.99").map(|r| r.metric("macro_f1").unwrap()).collect();
    f1.sort_by(f64::total_cmp);
    let a = res.aggregate("pvil r=0.99", "macro_f1").unwrap();
    assert_eq!((a.min, a.max, a.count), (f1[0], f1[1], 2));
    assert_eq!(a.median, 0.5 * (f1[0] + f1[1]));
    for r in &res.runs {
        assert_eq!(r.report.as_ref().unwrap().macro_f1, r.metric("macro_f1").unwrap());
    }
    let best = res.derived("lp_best_median_f1 r=0.9").unwrap();
    let chosen = res.aggregate(best.config.as_deref().unwrap(), "macro_f1").unwrap();
    assert_eq!(chosen.median, best.value);
    assert!(res
        .aggregates
        .iter()
        .filter(|a| a.quantity == "macro_f1" && a.config.starts_with("lp ") && a.config.ends_with("r=0.9"))
        .all(|a| a.median <= best.value));
}

#[test]
fn results_regenerate_identically_apart_from_timings() {
    let spec = small_curve();
    let a = run(&spec).unwrap().without_timings();
    let b = run(&spec).unwrap().without_timings();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.runs.iter().all(|r| r.timings.is_empty()));
    assert!(a.aggregates.iter().all(|x| !x.timing));
}

#[test]
fn memory_guard_skips_levels_cleanly() {
    let mut spec = BenchSpec::defaults(Experiment::LpTimeScaling);
    spec.sizes = vec![100, 3000];
    spec.step_sizes = vec![500];
    spec.seeds = vec![0];
    spec.lp_k = vec![10];
    spec.lp_lambda = vec![0.9];
    spec.min_timing_seconds = 0.0;
    let need = lp_working_set_bytes(3000, 2, 10, 2) / 1048576.0;
    spec.memory_budget_mb = need * 0.5;
    let res = run(&spec).unwrap();
    assert_eq!(res.runs.len(), spec.grid_size());
    let big: Vec<&RunRecord> = res.runs.iter().filter(|r| r.config.ends_with("n=3000")).collect();
    assert_eq!(big.len(), 1);
    assert!(big[0].skipped.as_deref().unwrap().contains("memory budget"));
    assert!(big[0].metrics.is_empty());
    let small = res.runs.iter().find(|r| r.config.ends_with("n=100")).unwrap();
    assert!(small.skipped.is_none() && small.metric("macro_f1").is_some());
    assert!(res.runs_of("pvil n=500").next().unwrap().metric("steps").is_some());
    // No slope can be formed without the second level.
    assert!(res.derived.iter().all(|d| !d.name.starts_with("lp_slope")));
    assert!(res.aggregate("lp k=10 lambda=0.9 n=3000", "macro_f1").is_none());
}

#[test]
fn reports_are_named_by_experiment_and_round_trip() {
    let mut spec = small_curve();
    spec.seeds = vec![3];
    let res = run(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = write_report(&res, dir.path()).unwrap();
    let second = write_report(&res, dir.path()).unwrap();
    assert_ne!(first.csv, second.csv);
    let name = first.csv.file_name().unwrap().to_str().unwrap().to_string();
    let stamp = name.strip_prefix("lp_accuracy_curve_").unwrap().strip_suffix(".csv").unwrap();
    assert_eq!(stamp.len(), "20260101T000000Z".len(), "{name}");
    assert!(stamp.ends_with('Z') && stamp.as_bytes()[8] == b'T');

    let mut rd = csv::Reader::from_path(&first.csv).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    for col in ["experiment", "config", "method", "seed", "skipped", "k", "lambda", "r_unlabeled", "macro_f1", "total_s"] {
        assert!(header.iter().any(|h| h == col), "{col} missing from {header:?}");
    }
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), res.runs.len());
    let f1 = header.iter().position(|h| h == "macro_f1").unwrap();
    for (row, run) in rows.iter().zip(&res.runs) {
        assert_eq!(row[f1].parse::<f64>().unwrap(), run.metric("macro_f1").unwrap());
    }
    let back: BenchResult = serde_json::from_str(&std::fs::read_to_string(&first.summary).unwrap()).unwrap();
    assert_eq!(back, res);
}

#[test]
fn missing_mnist_names_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_mnist(dir.path()).unwrap_err();
    assert!(matches!(err, BenchError::MissingMnist { .. }));
    let msg = err.to_string();
    for part in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "PVIL_MNIST_DIR", "mnist_from_npm.py"] {
        assert!(msg.contains(part), "{msg}");
    }
    let mut spec = BenchSpec::defaults(Experiment::MnistLabeling);
    spec.mnist_dir = Some(dir.path().to_path_buf());
    assert!(matches!(run(&spec), Err(BenchError::MissingMnist { .. })));
}

#[test]
fn mnist_partition_is_disjoint_and_seeded() {
    let (a, b) = mnist_partition(1000, 300, 200, 9).unwrap();
    assert_eq!((a.len(), b.len()), (300, 200));
    assert!(a.windows(2).all(|w| w[0] < w[1]) && b.windows(2).all(|w| w[0] < w[1]));
    assert!(a.iter().all(|i| b.binary_search(i).is_err()));
    assert_eq!(mnist_partition(1000, 300, 200, 9).unwrap(), (a.clone(), b));
    assert_ne!(mnist_partition(1000, 300, 200, 10).unwrap().0, a);
    assert!(mnist_partition(100, 80, 30, 0).is_err());
}

#[test]
fn experiments_refuse_foreign_specs() {
    let spec = BenchSpec::defaults(Experiment::DrCompare);
    assert!(matches!(pvil_bench::run_lp_accuracy_curve(&spec), Err(BenchError::InvalidSpec(_))));
}

#[test]
fn slope_and_repeat_timing() {
    assert!((loglog_slope(1e3, 2.0, 1e4, 200.0) - 2.0).abs() < 1e-12);
    assert!((loglog_slope(10.0, 5.0, 1000.0, 5.0)).abs() < 1e-12);
    let mut calls = 0;
    let (out, best) = timed(0.0, || {
        calls += 1;
        Ok(calls)
    })
    .unwrap();
    assert_eq!((out, calls), (1, 1));
    assert!(best >= 0.0);
    let mut calls = 0;
    timed(f64::INFINITY, || {
        calls += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(calls, 50);
}

fn record(config: &str, seed: u64, v: f64) -> RunRecord {
    let mut r = RunRecord::new(config, "x", seed);
    r.metrics = BTreeMap::from([("m".to_string(), v)]);
    r.timings = BTreeMap::from([("t_s".to_string(), v * 2.0)]);
    r
}

proptest! {
    #[test]
    fn aggregates_bracket_and_match_sorted_values(values in prop::collection::vec((0usize..3, -1e3f64..1e3), 1..40)) {
        let runs: Vec<RunRecord> = values.iter().enumerate().map(|(i, &(c, v))| record(&format!("c{c}"), i as u64, v)).collect();
        let aggs = aggregate(&runs);
        for a in &aggs {
            let mut v: Vec<f64> = runs
                .iter()
                .filter(|r| r.config == a.config)
                .map(|r| if a.timing { r.timings["t_s"] } else { r.metrics["m"] })
                .collect();
            prop_assert_eq!(a.count, v.len());
            prop_assert!(a.min <= a.median && a.median <= a.max);
            prop_assert_eq!(a.median, median(&mut v));
            prop_assert_eq!((a.min, a.max), (v[0], v[v.len() - 1]));
        }
        let configs: std::collections::BTreeSet<&str> = runs.iter().map(|r| r.config.as_str()).collect();
        prop_assert_eq!(aggs.len(), configs.len() * 2);
    }
}
