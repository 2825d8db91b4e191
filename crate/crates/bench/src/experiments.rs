// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pvil_core::datasets::{generate, load_mnist_idx, make_split, Dataset, PreprocessMode, PreprocessSpec};
use pvil_core::embed::{DrMethod, TsneParams};
use pvil_core::logistic::train_logistic;
use pvil_core::metrics::{accuracy, f1_report};
use pvil_core::rng::{permutation, seeded_rng};
use pvil_session::SessionConfig;

use crate::error::{BenchError, Result};
use crate::result::{median, BenchResult, RunRecord};
use crate::runs::{lp_grid_runs, loglog_slope, oracle_session, session_record, timed, view_reduction_seconds};
use crate::spec::{split_seed, BenchSpec, DrVariant, Experiment};

pub fn run(spec: &BenchSpec) -> Result<BenchResult> {
    match spec.experiment {
        Experiment::LpAccuracyCurve => run_lp_accuracy_curve(spec),
        Experiment::LpTimeScaling => run_lp_time_scaling(spec),
        Experiment::DrCompare => run_dr_compare(spec),
        Experiment::MnistLabeling => run_mnist_labeling(spec),
        Experiment::Downstream => run_downstream(spec),
    }
}

fn expect(spec: &BenchSpec, experiment: Experiment) -> Result<()> {
    if spec.experiment != experiment {
        return Err(BenchError::InvalidSpec(format!(
            "spec is for {}, not {experiment}",
            spec.experiment
        )));
    }
    spec.validate()
}

fn finish(spec: &BenchSpec, runs: Vec<RunRecord>) -> BenchResult {
    debug_assert_eq!(runs.len(), spec.seeds.len() * spec.grid_size());
    BenchResult::new(spec.clone(), runs)
}

fn session_config(spec: &BenchSpec) -> SessionConfig {
    SessionConfig {
        eta: spec.eta,
        ..SessionConfig::default()
    }
}

/// Grid configuration with the highest median of `metric` among those
/// starting with `prefix` and ending with `suffix`; ties keep the first.
fn best_config(res: &BenchResult, prefix: &str, suffix: &str, metric: &str) -> Option<(String, f64, f64)> {
    let mut best: Option<(String, f64, f64)> = None;
    for a in res.aggregates.iter().filter(|a| a.quantity == metric && !a.timing) {
        if a.config.starts_with(prefix) && a.config.ends_with(suffix) && best.as_ref().map_or(true, |b| a.median > b.1) {
            best = Some((a.config.clone(), a.median, a.min));
        }
    }
    best
}

fn derive_labeling_summary(res: &mut BenchResult, rates: &[f64]) {
    for &r in rates {
        let tag = format!("r={r}");
        if let Some((config, med, min)) = best_config(res, "lp ", &tag, "macro_f1") {
            res.derive(format!("lp_best_median_f1 {tag}"), med, Some(config.clone()), false);
            res.derive(format!("lp_best_min_f1 {tag}"), min, Some(config), false);
        }
        let pvil = format!("pvil {tag}");
        if let Some(a) = res.aggregate(&pvil, "macro_f1").cloned() {
            res.derive(format!("pvil_median_f1 {tag}"), a.median, Some(pvil.clone()), false);
            res.derive(format!("pvil_min_f1 {tag}"), a.min, Some(pvil), false);
        }
    }
}

/// LP over the grid and the scripted annotator, per unlabeled rate and seed.
pub fn run_lp_accuracy_curve(spec: &BenchSpec) -> Result<BenchResult> {
    expect(spec, Experiment::LpAccuracyCurve)?;
    let grid = spec.lp_grid();
    let mut runs = Vec::new();
    for &r in &spec.r_unlabeled {
        let tag = format!("r={r}");
        for &seed in &spec.seeds {
            let ds = Arc::new(generate(&spec.dataset, spec.n, spec.noise, seed)?);
            let split = make_split(&ds, r, split_seed(seed))?;
            for rec in lp_grid_runs(&ds, &split, &grid, &tag, seed, 0.0)? {
                runs.push(rec.param("r_unlabeled", r));
            }
            let (s, report, total) = oracle_session(ds, split, session_config(spec), &spec.policy)?;
            runs.push(session_record(format!("pvil {tag}"), "pvil", seed, &s, &report, total)?.param("r_unlabeled", r));
        }
    }
    let mut res = finish(spec, runs);
    derive_labeling_summary(&mut res, &spec.r_unlabeled);
    Ok(res)
}

/// Bytes held by the LP pipeline at size n: samples, neighbor lists, the
/// two sparse matrices and the score blocks.
pub fn lp_working_set_bytes(n: usize, dims: usize, k: usize, classes: usize) -> f64 {
    let (n, d, k, p) = (n as f64, dims as f64, k as f64, classes as f64);
    // Union symmetrization at most doubles the k·n directed edges.
    let edges = 2.0 * k * n;
    n * d * 8.0 + edges * 24.0 + 2.0 * (2.0 * edges * 16.0 + (n + 1.0) * 8.0) + 3.0 * n * p * 8.0
}

/// LP wall time per size over the grid, plus annotator step counts per size.
pub fn run_lp_time_scaling(spec: &BenchSpec) -> Result<BenchResult> {
    expect(spec, Experiment::LpTimeScaling)?;
    let grid = spec.lp_grid();
    let r = spec.r_unlabeled[0];
    let budget = spec.memory_budget_mb * 1024.0 * 1024.0;
    let kmax = spec.lp_k.iter().copied().max().unwrap_or(1);
    let mut runs = Vec::new();
    for &n in &spec.sizes {
        let tag = format!("n={n}");
        for &seed in &spec.seeds {
            let ds = generate(&spec.dataset, n, spec.noise, seed)?;
            let need = lp_working_set_bytes(n, ds.dims(), kmax, ds.num_classes());
            if need > budget {
                log::warn!("skipping LP at n={n}: needs {:.0} MiB", need / 1048576.0);
                for &(k, lambda) in &grid {
                    let mut rec = RunRecord::new(crate::runs::lp_config(k, lambda, &tag), "lp", seed)
                        .param("n", n as f64)
                        .param("k", k as f64)
                        .param("lambda", lambda);
                    rec.skipped = Some(format!(
                        "memory budget: needs {:.0} MiB, budget {:.0} MiB",
                        need / 1048576.0,
                        spec.memory_budget_mb
                    ));
                    runs.push(rec);
                }
                continue;
            }
            let split = make_split(&ds, r, split_seed(seed))?;
            for rec in lp_grid_runs(&ds, &split, &grid, &tag, seed, spec.min_timing_seconds)? {
                runs.push(rec.param("n", n as f64).param("r_unlabeled", r));
            }
        }
    }
    for &n in &spec.step_sizes {
        for &seed in &spec.seeds {
            let ds = Arc::new(generate(&spec.dataset, n, spec.noise, seed)?);
            let split = make_split(&ds, r, split_seed(seed))?;
            let (s, report, total) = oracle_session(ds, split, session_config(spec), &spec.policy)?;
            runs.push(
                session_record(format!("pvil n={n}"), "pvil", seed, &s, &report, total)?
                    .param("n", n as f64)
                    .param("r_unlabeled", r),
            );
        }
    }
    let mut res = finish(spec, runs);

    let mut sizes = spec.sizes.clone();
    sizes.sort_unstable();
    for pair in sizes.windows(2) {
        let (n0, n1) = (pair[0], pair[1]);
        let mut slopes = Vec::new();
        for &(k, lambda) in &grid {
            let t = |n: usize| {
                res.aggregate(&crate::runs::lp_config(k, lambda, &format!("n={n}")), "total_s")
                    .map(|a| a.median)
            };
            if let (Some(t0), Some(t1)) = (t(n0), t(n1)) {
                let slope = loglog_slope(n0 as f64, t0, n1 as f64, t1);
                slopes.push(slope);
                let config = format!("lp k={k} lambda={lambda}");
                res.derive(format!("lp_slope {config} n={n0}..{n1}"), slope, Some(config), true);
            }
        }
        if !slopes.is_empty() {
            res.derive(format!("lp_median_slope n={n0}..{n1}"), median(&mut slopes), None, true);
        }
    }
    if let Some(&n0) = sizes.first() {
        let tag = format!("n={n0}");
        let worst = res
            .runs
            .iter()
            .filter(|r| r.method == "lp" && r.config.ends_with(&tag))
            .filter_map(|r| r.timing("total_s"))
            .fold(f64::NAN, f64::max);
        if worst.is_finite() {
            res.derive(format!("lp_max_seconds {tag}"), worst, None, true);
        }
    }
    let mut medians = Vec::new();
    for &n in &spec.step_sizes {
        let config = format!("pvil n={n}");
        if let Some(a) = res.aggregate(&config, "steps").cloned() {
            res.derive(format!("pvil_median_steps n={n}"), a.median, Some(config), false);
            medians.push(a.median);
        }
    }
    // Largest departure from the count at the first size.
    if let Some(&first) = medians.first() {
        let dev = medians.iter().map(|m| (m - first).abs()).fold(0.0, f64::max);
        res.derive("pvil_steps_max_deviation", dev, None, false);
    }
    Ok(res)
}

fn variant_config(spec: &BenchSpec, variant: DrVariant, seed: u64) -> SessionConfig {
    let base = session_config(spec);
    match variant {
        DrVariant::PcaOnce => SessionConfig {
            method: DrMethod::Pca,
            reprojection: false,
            ..base
        },
        DrVariant::Isomap => SessionConfig {
            method: DrMethod::Isomap(spec.isomap),
            reprojection: false,
            ..base
        },
        DrVariant::Tsne => SessionConfig {
            method: DrMethod::Tsne(TsneParams { seed, ..spec.tsne }),
            reprojection: false,
            ..base
        },
        DrVariant::MdrTwicePca => SessionConfig {
            method: DrMethod::Pca,
            reprojection: true,
            ..base
        },
    }
}

/// Scripted annotator over views from each reduction method.
pub fn run_dr_compare(spec: &BenchSpec) -> Result<BenchResult> {
    expect(spec, Experiment::DrCompare)?;
    let r = spec.r_unlabeled[0];
    let mut runs = Vec::new();
    for &seed in &spec.seeds {
        let ds = Arc::new(generate(&spec.dataset, spec.n, spec.noise, seed)?);
        let split = make_split(&ds, r, split_seed(seed))?;
        for &variant in &spec.methods {
            let cfg = variant_config(spec, variant, seed);
            let (s, report, total) = oracle_session(ds.clone(), split.clone(), cfg, &spec.policy)?;
            let mut rec = session_record(variant.name(), variant.name(), seed, &s, &report, total)?.param("r_unlabeled", r);
            rec.timings.insert("dr_s".into(), view_reduction_seconds(&s, spec.min_timing_seconds)?);
            runs.push(rec);
        }
    }
    let mut res = finish(spec, runs);
    let med = |res: &BenchResult, v: DrVariant, q: &str| res.aggregate(v.name(), q).map(|a| a.median);
    for &v in &spec.methods {
        if let Some(f1) = med(&res, v, "macro_f1") {
            res.derive(format!("median_f1 {}", v.name()), f1, Some(v.name().into()), false);
        }
        if let Some(t) = med(&res, v, "dr_s") {
            res.derive(format!("median_dr_s {}", v.name()), t, Some(v.name().into()), true);
        }
    }
    if let (Some(p), Some(i), Some(t)) = (
        med(&res, DrVariant::PcaOnce, "dr_s"),
        med(&res, DrVariant::Isomap, "dr_s"),
        med(&res, DrVariant::Tsne, "dr_s"),
    ) {
        res.derive("time_order_pca_isomap_tsne", (p < i && i < t) as u8 as f64, None, true);
    }
    if let (Some(p), Some(m)) = (med(&res, DrVariant::PcaOnce, "dr_s"), med(&res, DrVariant::MdrTwicePca, "dr_s")) {
        res.derive("mdr_over_pca_time", m / p, None, true);
    }
    Ok(res)
}

pub const MNIST_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_LABELS: &str = "train-labels-idx1-ubyte";

/// `spec.mnist_dir`, else `$PVIL_MNIST_DIR`, else `data/mnist`.
pub fn mnist_dir(spec: &BenchSpec) -> PathBuf {
    spec.mnist_dir
        .clone()
        .or_else(|| std::env::var_os("PVIL_MNIST_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

pub fn load_mnist(dir: &Path) -> Result<Dataset> {
    let missing: Vec<&str> = [MNIST_IMAGES, MNIST_LABELS]
        .into_iter()
        .filter(|f| !dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(BenchError::MissingMnist {
            dir: dir.to_path_buf(),
            missing: missing.join(", "),
        });
    }
    Ok(load_mnist_idx(dir.join(MNIST_IMAGES), dir.join(MNIST_LABELS))?)
}

/// Disjoint sorted index sets: a labeling subset and a held-out set.
pub fn mnist_partition(n: usize, subset: usize, holdout: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if subset + holdout > n {
        return Err(BenchError::InvalidSpec(format!(
            "subset {subset} plus holdout {holdout} exceeds the {n} available images"
        )));
    }
    let perm = permutation(&mut seeded_rng(seed), n);
    let mut a = perm[..subset].to_vec();
    let mut b = perm[subset..subset + holdout].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// Pixels stay in [0, 1]; the root view and every reprojection use t-SNE.
fn mnist_session_config(spec: &BenchSpec, seed: u64) -> SessionConfig {
    SessionConfig {
        preprocess: PreprocessMode::None,
        method: DrMethod::Tsne(TsneParams { seed, ..spec.tsne }),
        reproject_method: None,
        eta: spec.eta,
        reprojection: true,
    }
}

/// LP over the grid against the annotator on t-SNE views with reprojection.
pub fn run_mnist_labeling(spec: &BenchSpec) -> Result<BenchResult> {
    expect(spec, Experiment::MnistLabeling)?;
    let full = load_mnist(&mnist_dir(spec))?;
    let grid = spec.lp_grid();
    let mut runs = Vec::new();
    for &r in &spec.r_unlabeled {
        let tag = format!("r={r}");
        for &seed in &spec.seeds {
            let (idx, _) = mnist_partition(full.len(), spec.subset, 0, seed)?;
            let ds = Arc::new(full.subset(&idx));
            let split = make_split(&ds, r, split_seed(seed))?;
            for rec in lp_grid_runs(&ds, &split, &grid, &tag, seed, 0.0)? {
                runs.push(rec.param("r_unlabeled", r));
            }
            let (s, report, total) = oracle_session(ds, split, mnist_session_config(spec, seed), &spec.policy)?;
            runs.push(session_record(format!("pvil {tag}"), "pvil", seed, &s, &report, total)?.param("r_unlabeled", r));
        }
    }
    let mut res = finish(spec, runs);
    derive_labeling_summary(&mut res, &spec.r_unlabeled);
    Ok(res)
}

/// Logistic regression trained on true labels and on annotator-exported
/// labels of the same subset, scored on a disjoint held-out set.
pub fn run_downstream(spec: &BenchSpec) -> Result<BenchResult> {
    expect(spec, Experiment::Downstream)?;
    let full = load_mnist(&mnist_dir(spec))?;
    let mut runs = Vec::new();
    for &r in &spec.r_unlabeled {
        let tag = format!("r={r}");
        for &seed in &spec.seeds {
            let (idx, held) = mnist_partition(full.len(), spec.subset, spec.holdout, seed)?;
            let ds = Arc::new(full.subset(&idx));
            let test = full.subset(&held);
            let split = make_split(&ds, r, split_seed(seed))?;
            let (s, _, _) = oracle_session(ds.clone(), split, mnist_session_config(spec, seed), &spec.policy)?;
            let label_f1 = f1_report(&s.ledger().labels(), &ds.truth)?.macro_f1;

            let scaler = PreprocessSpec::fit(PreprocessMode::Zscore, &ds.samples);
            let x = scaler.apply_matrix(&ds.samples)?;
            let x_test = scaler.apply_matrix(&test.samples)?;
            let exported = s.export_labels()?;
            let rows: Vec<usize> = exported.iter().map(|e| e.index).collect();
            let labels: Vec<usize> = exported.iter().map(|e| e.class).collect();
            let arms = [
                ("truth", x.clone(), ds.truth.clone()),
                ("pvil", x.select_rows(&rows), labels),
            ];
            for (arm, xa, ya) in arms {
                let (model, train_s) = timed(0.0, || Ok(train_logistic(&xa, &ya, &spec.logistic)?))?;
                let acc = accuracy(&model.classify(&x_test)?, &test.truth)?;
                let mut rec = RunRecord::new(format!("logistic_{arm} {tag}"), format!("logistic_{arm}"), seed)
                    .param("r_unlabeled", r);
                rec.metrics.insert("heldout_accuracy".into(), acc);
                rec.metrics.insert("train_size".into(), ya.len() as f64);
                if arm == "pvil" {
                    rec.metrics.insert("label_f1".into(), label_f1);
                    rec.metrics.insert("unlabeled_rate".into(), s.ledger().unlabeled_rate());
                }
                rec.timings.insert("train_s".into(), train_s);
                runs.push(rec);
            }
        }
    }
    let mut res = finish(spec, runs);
    for &r in &spec.r_unlabeled {
        let tag = format!("r={r}");
        let truth: Vec<f64> = res.runs_of(&format!("logistic_truth {tag}")).filter_map(|x| x.metric("heldout_accuracy")).collect();
        let pvil: Vec<f64> = res.runs_of(&format!("logistic_pvil {tag}")).filter_map(|x| x.metric("heldout_accuracy")).collect();
        let mut gaps: Vec<f64> = truth.iter().zip(&pvil).map(|(a, b)| a - b).collect();
        if !gaps.is_empty() {
            res.derive(format!("median_gap {tag}"), median(&mut gaps), None, false);
        }
    }
    Ok(res)
}
