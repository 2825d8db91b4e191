// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! `PVIL_ACCEPTANCE=2,7` restricts the run to the listed criteria.
//! MNIST is read from `$PVIL_MNIST_DIR`, else `<workspace>/data/mnist`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pvil_bench::{run, BenchResult, BenchSpec, Experiment};
use pvil_core::datasets::{generate, make_split, SeedSplit};
use pvil_core::distance::pairwise_distances;
use pvil_core::embed::{classical_mds, pca_project, DrMethod, TsneParams};
use pvil_core::labelprop::{build_affinity, normalize, propagate, seed_matrix, Gamma};
use pvil_core::linalg::sym_eigendecompose;
use pvil_core::logistic::loss_and_gradient;
use pvil_core::Matrix;
use pvil_session::eventlog::{append_events, read_event_file};
use pvil_session::geometry::Point;
use pvil_session::oracle::{run_headless, AnnotatorPolicy};
use pvil_session::{SelectionRegion, Session, SessionConfig};

struct Outcome {
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Self { checks: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push((what.into(), ok));
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.check(false, format!("{what}: {e}"));
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.1)
    }
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("PVIL_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn spec(e: Experiment) -> BenchSpec {
    let mut s = BenchSpec::defaults(e);
    if matches!(e, Experiment::MnistLabeling | Experiment::Downstream) {
        s.mnist_dir = Some(mnist_dir());
    }
    s
}

fn derived(res: &BenchResult, name: &str) -> f64 {
    res.derived(name).map_or(f64::NAN, |d| d.value)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Gaussian elimination with partial pivoting for A·X = B.
fn dense_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let mut a = a.clone();
    let mut b = b.clone();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
        for j in 0..n {
            let t = a[(c, j)];
            a[(c, j)] = a[(p, j)];
            a[(p, j)] = t;
        }
        for j in 0..m {
            let t = b[(c, j)];
            b[(c, j)] = b[(p, j)];
            b[(p, j)] = t;
        }
        for r in (c + 1)..n {
            let f = a[(r, c)] / a[(c, c)];
            for j in c..n {
                a[(r, j)] -= f * a[(c, j)];
            }
            for j in 0..m {
                b[(r, j)] -= f * b[(c, j)];
            }
        }
    }
    let mut x = Matrix::zeros(n, m);
    for j in 0..m {
        for r in (0..n).rev() {
            let mut s = b[(r, j)];
            for c in (r + 1)..n {
                s -= a[(r, c)] * x[(c, j)];
            }
            x[(r, j)] = s / a[(r, r)];
        }
    }
    x
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut worst = 0.0f64;
    for n in [2, 7, 30, 90, 200] {
        let r = random_matrix(&mut rng, n, n);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = r[(i, j)] + r[(j, i)];
            }
        }
        let eig = sym_eigendecompose(&a).unwrap();
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for i in 0..n {
            for k in 0..n {
                scaled[(i, k)] *= eig.eigenvalues[k];
            }
        }
        let back = scaled.matmul(&v.transpose()).unwrap();
        worst = worst.max(back.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm());
    }
    o.check(worst <= 1e-8, format!("eigen reconstruction {worst:.1e} <= 1e-8"));

    let mut worst = 0.0f64;
    for (n, d) in [(50, 3), (300, 12), (120, 40)] {
        let mut x = random_matrix(&mut rng, n, d);
        for i in 0..n {
            for j in 0..d {
                x[(i, j)] *= 1.0 + j as f64;
            }
        }
        for k in [1, 2, d] {
            let (basis, _) = pca_project(&x, k).unwrap();
            let gram = basis.transpose().matmul(&basis).unwrap();
            worst = worst.max(gram.sub(&Matrix::identity(k)).unwrap().max_abs());
        }
    }
    o.check(worst <= 1e-10, format!("PCA orthonormality {worst:.1e} <= 1e-10"));

    let mut worst = 0.0f64;
    for (n, dims) in [(10, 2), (60, 2), (80, 3)] {
        let x = random_matrix(&mut rng, n, dims);
        let d = pairwise_distances(&x).unwrap();
        let y = classical_mds(&d, dims).unwrap();
        let dy = pairwise_distances(&y).unwrap();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((dy.get(i, j) - d.get(i, j)).abs());
            }
        }
    }
    o.check(worst <= 1e-6, format!("MDS distance recovery {worst:.1e} <= 1e-6"));

    let mut worst = 0.0f64;
    for (n, lambda) in [(12, 0.5), (40, 0.9), (50, 0.99)] {
        let x = random_matrix(&mut rng, n, 2);
        let p = 3;
        let split = SeedSplit::from_labeled(n, vec![0, 1, 2, 5, 8]).unwrap();
        let labels: Vec<usize> = (0..split.labeled.len()).map(|i| i % p).collect();
        let g = normalize(build_affinity(&x, 5, Gamma::Auto).unwrap()).unwrap();
        let s = g.s.as_ref().unwrap().to_dense();
        let q = seed_matrix(n, p, &split, &labels).unwrap();
        let mut a = Matrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= lambda * s[(i, j)];
            }
        }
        let mut rhs = q.clone();
        rhs.as_mut_slice().iter_mut().for_each(|v| *v *= 1.0 - lambda);
        let exact = dense_solve(&a, &rhs);
        let f = propagate(&g, &split, &labels, p, lambda, 1e-13, 200_000).unwrap();
        worst = worst.max(f.f.sub(&exact).unwrap().max_abs());
    }
    o.check(worst <= 1e-6, format!("LP vs closed form {worst:.1e} <= 1e-6"));

    let mut worst = 0.0f64;
    for (n, d, p) in [(30, 4, 3), (50, 6, 5)] {
        let x = random_matrix(&mut rng, n, d);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..p)).collect();
        let theta: Vec<f64> = (0..p * d + p).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, g) = loss_and_gradient(&x, &y, p, 1e-2, &theta);
        let h = 1e-6;
        let fd: Vec<f64> = (0..theta.len())
            .map(|i| {
                let mut t = theta.clone();
                t[i] += h;
                let up = loss_and_gradient(&x, &y, p, 1e-2, &t).0;
                t[i] -= 2.0 * h;
                let down = loss_and_gradient(&x, &y, p, 1e-2, &t).0;
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / scale);
    }
    o.check(worst <= 1e-5, format!("logistic gradient {worst:.1e} <= 1e-5 relative"));
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    match run(&spec(Experiment::LpAccuracyCurve)) {
        Ok(res) => {
            let lp90 = derived(&res, "lp_best_median_f1 r=0.9");
            let lp99 = derived(&res, "lp_best_min_f1 r=0.99");
            let pv99 = derived(&res, "pvil_median_f1 r=0.99");
            o.check(lp90 >= 0.95, format!("LP median F1 {lp90:.4} at R=0.90 >= 0.95"));
            o.check(lp99 < 0.8, format!("LP min F1 {lp99:.4} at R=0.99 < 0.8"));
            o.check(pv99 >= 0.95, format!("oracle median F1 {pv99:.4} at R=0.99 >= 0.95"));
        }
        Err(e) => o.error("lp_accuracy_curve", e),
    }
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    match run(&spec(Experiment::LpTimeScaling)) {
        Ok(res) => {
            let slope = derived(&res, "lp_median_slope n=1000..10000");
            let dev = derived(&res, "pvil_steps_max_deviation");
            let small = derived(&res, "lp_max_seconds n=100");
            let steps: Vec<String> = [1_000, 10_000, 100_000]
                .iter()
                .map(|n| format!("{}", derived(&res, &format!("pvil_median_steps n={n}"))))
                .collect();
            o.check(slope >= 1.5, format!("LP log-log slope {slope:.3} (grid median) >= 1.5"));
            o.check(dev <= 1.0, format!("oracle steps {} within +-1", steps.join("/")));
            o.check(small < 1.0, format!("LP at n=100 {small:.4} s < 1 s"));
        }
        Err(e) => o.error("lp_time_scaling", e),
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    match run(&spec(Experiment::DrCompare)) {
        Ok(res) => {
            let f = |v: &str| derived(&res, &format!("median_f1 {v}"));
            let (pca, iso, tsne, mdr) = (f("pca_once"), f("isomap"), f("tsne"), f("mdr_twice_pca"));
            o.check(pca <= 0.75, format!("PCA-once F1 {pca:.4} <= 0.75"));
            o.check((0.65..=0.95).contains(&iso), format!("ISOMAP F1 {iso:.4} in [0.65, 0.95]"));
            o.check(tsne >= 0.95, format!("t-SNE F1 {tsne:.4} >= 0.95"));
            o.check(mdr >= 0.95, format!("MDR F1 {mdr:.4} >= 0.95"));
            let t = |v: &str| derived(&res, &format!("median_dr_s {v}"));
            o.check(
                derived(&res, "time_order_pca_isomap_tsne") == 1.0,
                format!(
                    "DR time PCA {:.2e} < ISOMAP {:.2e} < t-SNE {:.2e} s",
                    t("pca_once"),
                    t("isomap"),
                    t("tsne")
                ),
            );
            let ratio = derived(&res, "mdr_over_pca_time");
            o.check(ratio <= 5.0, format!("MDR/PCA time {ratio:.2} <= 5"));
        }
        Err(e) => o.error("dr_compare", e),
    }
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    match run(&spec(Experiment::MnistLabeling)) {
        Ok(res) => {
            let lp = derived(&res, "lp_best_median_f1 r=0.995");
            let pv = derived(&res, "pvil_median_f1 r=0.995");
            o.check(lp < 0.5, format!("LP median F1 {lp:.4} (best of grid) < 0.5"));
            o.check(pv >= 0.80, format!("oracle median F1 {pv:.4} >= 0.80"));
        }
        Err(e) => o.error("mnist_labeling", e),
    }
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    match run(&spec(Experiment::Downstream)) {
        Ok(res) => {
            let gap = derived(&res, "median_gap r=0.995");
            let acc = |c: &str| res.aggregate(c, "heldout_accuracy").map_or(f64::NAN, |a| a.median);
            o.check(
                gap <= 0.05,
                format!(
                    "held-out gap {gap:.4} <= 0.05 (truth {:.4}, exported {:.4})",
                    acc("logistic_truth r=0.995"),
                    acc("logistic_pvil r=0.995")
                ),
            );
        }
        Err(e) => o.error("downstream", e),
    }
    o
}

/// Small specs for every experiment, cheap enough to run twice.
fn mini_specs() -> Vec<BenchSpec> {
    let mut out = Vec::new();
    let mut s = spec(Experiment::LpAccuracyCurve);
    s.seeds = vec![0, 1, 2];
    s.r_unlabeled = vec![0.9, 0.99];
    out.push(s);
    let mut s = spec(Experiment::LpTimeScaling);
    s.sizes = vec![100, 400];
    s.step_sizes = vec![1_000, 4_000];
    s.seeds = vec![0, 1];
    s.min_timing_seconds = 0.0;
    out.push(s);
    let mut s = spec(Experiment::DrCompare);
    s.n = 400;
    s.seeds = vec![3];
    s.r_unlabeled = vec![0.98];
    s.tsne.iterations = 150;
    s.min_timing_seconds = 0.0;
    out.push(s);
    for e in [Experiment::MnistLabeling, Experiment::Downstream] {
        let mut s = spec(e);
        s.subset = 300;
        s.holdout = 200;
        s.seeds = vec![4];
        s.r_unlabeled = vec![0.97];
        s.tsne.iterations = 150;
        s.lp_k = vec![10];
        s.logistic.epochs = 40;
        out.push(s);
    }
    out
}

fn point_in_polygon_cases(o: &mut Outcome) {
    fn ray_cast(poly: &[Point], p: Point) -> bool {
        let mut inside = false;
        let mut j = poly.len() - 1;
        for i in 0..poly.len() {
            let (a, b) = (poly[i], poly[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut cases, mut mismatches) = (0, 0);
    while cases < 10_000 {
        let m = rng.gen_range(3..32);
        let mut angles: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        let poly: Vec<Point> = angles
            .iter()
            .map(|&a| {
                let r = rng.gen_range(0.3..2.0);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let Ok(region) = SelectionRegion::new(poly.clone()) else {
            continue;
        };
        for _ in 0..20 {
            let p = [rng.gen_range(-2.2..2.2), rng.gen_range(-2.2..2.2)];
            mismatches += (region.contains(p) != ray_cast(&poly, p)) as usize;
            cases += 1;
        }
    }
    o.check(mismatches == 0, format!("point-in-polygon {mismatches} mismatches in {cases} cases"));
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let mut same = 0;
    let specs = mini_specs();
    for s in &specs {
        match (run(s), run(s)) {
            (Ok(a), Ok(b)) => {
                let (a, b) = (a.without_timings(), b.without_timings());
                let text = |r: &BenchResult| serde_json::to_string(r).unwrap();
                if a == b && text(&a) == text(&b) && a.runs.len() == s.seeds.len() * s.grid_size() {
                    same += 1;
                } else {
                    o.check(false, format!("{} differs between runs", s.experiment));
                }
            }
            (Err(e), _) | (_, Err(e)) => o.error(s.experiment.name(), e),
        }
    }
    o.check(same == specs.len(), format!("{same}/{} benchmarks regenerate identically", specs.len()));

    let dir = tempfile::tempdir().unwrap();
    let configs = [
        SessionConfig::default(),
        SessionConfig {
            method: DrMethod::Tsne(TsneParams {
                iterations: 200,
                ..TsneParams::default()
            }),
            ..SessionConfig::default()
        },
    ];
    let mut replayed = 0;
    for (k, cfg) in configs.into_iter().enumerate() {
        let ds = Arc::new(generate("four_gaussians", 600, None, 11 + k as u64).unwrap());
        let split = make_split(&ds, 0.98, 5).unwrap();
        let mut s = Session::create("acceptance", ds.clone(), cfg, split).unwrap();
        let report = run_headless(&mut s, &AnnotatorPolicy::default()).unwrap();
        let path = dir.path().join(format!("s{k}.jsonl"));
        append_events(&path, &report.transcript).unwrap();
        let events = read_event_file(&path).unwrap();
        match Session::replay(&events, ds) {
            Ok(r) => {
                let views_equal = r.views().len() == s.views().len()
                    && r.views().iter().zip(s.views()).all(|(a, b)| a.embedding == b.embedding);
                if r.ledger() == s.ledger() && r.export_labels().ok() == s.export_labels().ok() && views_equal {
                    replayed += 1;
                }
            }
            Err(e) => o.error("replay", e),
        }
    }
    o.check(replayed == 2, format!("{replayed}/2 event logs replay to identical ledgers"));
    point_in_polygon_cases(&mut o);
    o
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("PVIL_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(u32, &str, f64, fn() -> Outcome); 7] = [
        (1, "numerical core", 60.0, criterion_1),
        (2, "moons accuracy curve", 300.0, criterion_2),
        (3, "time scaling", 600.0, criterion_3),
        (4, "reduction comparison", 900.0, criterion_4),
        (5, "MNIST labeling", 1200.0, criterion_5),
        (6, "downstream classifier", 300.0, criterion_6),
        (7, "determinism and replay", f64::INFINITY, criterion_7),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, title, limit, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let mut outcome = f();
        let secs = t.elapsed().as_secs_f64();
        if limit.is_finite() {
            outcome.check(secs < limit, format!("{secs:.1} s < {limit:.0} s"));
        }
        let pass = outcome.passed();
        let detail: Vec<String> = outcome
            .checks
            .iter()
            .map(|(w, ok)| if *ok { w.clone() } else { format!("NOT {w}") })
            .collect();
        println!(
            "criterion {id} {} {title}: {} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            detail.join("; ")
        );
        ran += 1;
        failed += (!pass) as usize;
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
