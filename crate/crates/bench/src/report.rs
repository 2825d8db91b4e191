// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::result::BenchResult;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Writes one CSV row per run. Columns: experiment, config, method, seed,
/// skipped, then every parameter, metric and timing key in sorted order.
pub fn write_runs_csv(w: impl Write, result: &BenchResult) -> Result<()> {
    let params: BTreeSet<&String> = result.runs.iter().flat_map(|r| r.params.keys()).collect();
    let metrics: BTreeSet<&String> = result.runs.iter().flat_map(|r| r.metrics.keys()).collect();
    let timings: BTreeSet<&String> = result.runs.iter().flat_map(|r| r.timings.keys()).collect();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["experiment", "config", "method", "seed", "skipped"];
    header.extend(params.iter().chain(&metrics).chain(&timings).map(|s| s.as_str()));
    out.write_record(&header)?;
    let cell = |v: Option<&f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in &result.runs {
        let mut row = vec![
            result.spec.experiment.name().to_string(),
            r.config.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.skipped.clone().unwrap_or_default(),
        ];
        row.extend(params.iter().map(|k| cell(r.params.get(*k))));
        row.extend(metrics.iter().map(|k| cell(r.metrics.get(*k))));
        row.extend(timings.iter().map(|k| cell(r.timings.get(*k))));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `<experiment>_<timestamp>.csv` and the full result as
/// `<experiment>_<timestamp>.json` under `dir`.
pub fn write_report(result: &BenchResult, dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(dir)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let name = result.spec.experiment.name();
    let mut base = format!("{name}_{stamp}");
    let mut k = 1;
    while dir.join(format!("{base}.csv")).exists() {
        base = format!("{name}_{stamp}-{k}");
        k += 1;
    }
    let paths = ReportPaths {
        csv: dir.join(format!("{base}.csv")),
        summary: dir.join(format!("{base}.json")),
    };
    write_runs_csv(fs::File::create(&paths.csv)?, result)?;
    fs::write(&paths.summary, serde_json::to_string_pretty(result)?)?;
    Ok(paths)
}
