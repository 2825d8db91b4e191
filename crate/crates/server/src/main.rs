// SPDX-License-Identifier: Apache-2.0

//! `pvil`: serve the labeling API, run benchmarks, generate datasets and run
//! label propagation from the command line.
//!
//! Results go to stdout as one JSON line. Failures go to stderr as one JSON
//! line `{"error": {"code": ..., "message": ...}}` with a nonzero exit code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use pvil_bench::runs::lp_grid_runs;
use pvil_bench::{BenchSpec, Experiment};
use pvil_core::datasets::{generate, make_split, read_dataset_file, write_dataset_file};
use pvil_server::{router, AppState};

#[derive(Parser)]
#[command(name = "pvil", version, about = "Interactive labeling workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP/JSON session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Holds `datasets/*.pvds` and the session logs under `sessions/`.
        #[arg(long, default_value = "pvil-data")]
        data_dir: PathBuf,
        #[arg(long, env = "PVIL_MNIST_DIR", default_value = "data/mnist")]
        mnist_dir: PathBuf,
    },
    /// Run a benchmark experiment and write its CSV and JSON reports.
    Bench {
        /// lp_accuracy_curve, lp_time_scaling, dr_compare, mnist_labeling or downstream.
        experiment: Experiment,
        /// JSON spec overriding the experiment defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Generate a synthetic dataset record.
    Gen {
        /// two_moons, x_shape or four_gaussians.
        dataset: String,
        /// Sample count (a multiple of 4 for four_gaussians).
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise level; the generator default when omitted.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label propagation on a dataset record.
    Lp {
        #[arg(long)]
        dataset: PathBuf,
        /// Unlabeled rate.
        #[arg(long, default_value_t = 0.99)]
        rate: f64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.99)]
        lambda: f64,
        /// Seed of the labeled split.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, e: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(Failure::new("usage", one_line(&e.render().to_string()))),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.command {
        Command::Serve {
            port,
            host,
            data_dir,
            mnist_dir,
        } => serve(&host, port, &data_dir, mnist_dir),
        Command::Bench { experiment, spec, out } => bench(experiment, spec.as_deref(), &out),
        Command::Gen {
            dataset,
            n,
            seed,
            noise,
            out,
        } => gen(&dataset, n, seed, noise, &out),
        Command::Lp {
            dataset,
            rate,
            k,
            lambda,
            seed,
        } => lp(&dataset, rate, k, lambda, seed),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json!({"error": {"code": f.code, "message": one_line(&f.message)}}));
    ExitCode::from(if f.code == "usage" { 2 } else { 1 })
}

fn serve(host: &str, port: u16, data_dir: &Path, mnist_dir: PathBuf) -> Outcome {
    let state = Arc::new(AppState::open(data_dir, mnist_dir).map_err(|e| Failure::new(e.code, e.message))?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::new("io", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::new("io", format!("bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Failure::new("io", e))?;
        println!("{}", json!({"listening": addr.to_string()}));
        log::info!("serving on http://{addr}");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::new("io", e))?;
        Ok(json!({"stopped": addr.to_string()}))
    })
}

fn bench(experiment: Experiment, spec: Option<&Path>, out: &Path) -> Outcome {
    let spec = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
            let spec = BenchSpec::from_json(&text).map_err(|e| Failure::new("invalid_spec", e))?;
            if spec.experiment != experiment {
                return Err(Failure::new(
                    "invalid_spec",
                    format!("{} describes {}, not {experiment}", path.display(), spec.experiment),
                ));
            }
            spec
        }
        None => BenchSpec::defaults(experiment),
    };
    let result = pvil_bench::run(&spec).map_err(|e| Failure::new("bench", e))?;
    std::fs::create_dir_all(out).map_err(|e| Failure::new("io", format!("{}: {e}", out.display())))?;
    let paths = pvil_bench::write_report(&result, out).map_err(|e| Failure::new("io", e))?;
    let derived: serde_json::Map<String, Value> = result.derived.iter().map(|d| (d.name.clone(), json!(d.value))).collect();
    Ok(json!({
        "experiment": experiment.name(),
        "runs": result.runs.len(),
        "csv": paths.csv,
        "summary": paths.summary,
        "derived": derived,
    }))
}

fn gen(dataset: &str, n: usize, seed: u64, noise: Option<f64>, out: &Path) -> Outcome {
    let ds = generate(dataset, n, noise, seed).map_err(|e| Failure::new("invalid_argument", e))?;
    write_dataset_file(out, &ds).map_err(|e| Failure::new("io", e))?;
    Ok(json!({
        "out": out,
        "dataset": ds.name,
        "n": ds.len(),
        "dims": ds.dims(),
        "classes": ds.num_classes(),
    }))
}

fn lp(dataset: &Path, rate: f64, k: usize, lambda: f64, seed: u64) -> Outcome {
    let ds = read_dataset_file(dataset).map_err(|e| Failure::new("io", e))?;
    let split = make_split(&ds, rate, seed).map_err(|e| Failure::new("invalid_argument", e))?;
    let mut runs =
        lp_grid_runs(&ds, &split, &[(k, lambda)], &format!("r={rate}"), seed, 0.0).map_err(|e| Failure::new("lp", e))?;
    let run = runs.pop().expect("one grid point gives one run");
    Ok(json!({
        "dataset": ds.name,
        "n": ds.len(),
        "seeds": split.labeled.len(),
        "k": k,
        "lambda": lambda,
        "rate": rate,
        "macro_f1": run.metrics["macro_f1"],
        "iterations": run.metrics["iterations"],
        "converged": run.metrics["converged"] == 1.0,
        "unreached": run.metrics["unreached"],
        "seconds": run.timings["total_s"],
    }))
}
