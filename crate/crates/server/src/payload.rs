// SPDX-License-Identifier: Apache-2.0

//! Request and response bodies of the HTTP API.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use pvil_core::datasets::PreprocessMode;
use pvil_core::embed::{DrMethod, IsomapParams, TsneParams};
use pvil_session::{ExportEntry, LabelSource, LabelStatus, Resolution, SelectionRecord, Session, SessionConfig};

use crate::datasets::DatasetSpec;
use crate::error::{ApiError, Result};

fn default_method() -> String {
    "pca".into()
}

fn default_eta() -> f64 {
    0.85
}

fn yes() -> bool {
    true
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub preprocess: PreprocessMode,
    #[serde(default = "default_method")]
    pub dr_method: String,
    #[serde(default)]
    pub params: Option<Map<String, Value>>,
    #[serde(default)]
    pub reproject_method: Option<String>,
    #[serde(default)]
    pub reproject_params: Option<Map<String, Value>>,
    #[serde(alias = "R_unlabeled")]
    pub r_unlabeled: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Seeds the labeled split and, unless `params` sets one, t-SNE.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub reprojection: bool,
}

impl CreateSession {
    pub fn config(&self) -> Result<SessionConfig> {
        let method = build_method(&self.dr_method, self.params.as_ref(), self.seed)?;
        let reproject_method = match &self.reproject_method {
            Some(name) => Some(build_method(name, self.reproject_params.as_ref(), self.seed)?),
            None if self.reproject_params.is_some() => {
                return Err(ApiError::invalid("reproject_params given without reproject_method"))
            }
            None => None,
        };
        Ok(SessionConfig {
            preprocess: self.preprocess,
            method,
            reproject_method,
            eta: self.eta,
            reprojection: self.reprojection,
        })
    }
}

/// Overlays `params` on the serialized defaults, refusing unknown keys.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(method: &str, base: T, params: Map<String, Value>) -> Result<T> {
    let Value::Object(mut obj) = serde_json::to_value(&base).map_err(|e| ApiError::internal(e.to_string()))? else {
        return Err(ApiError::internal("parameters do not serialize to an object"));
    };
    for (k, v) in params {
        if !obj.contains_key(&k) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            return Err(ApiError::invalid(format!(
                "unknown {method} parameter '{k}' (known: {})",
                known.join(", ")
            )));
        }
        obj.insert(k, v);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| ApiError::invalid(format!("{method} parameters: {e}")))
}

pub fn build_method(name: &str, params: Option<&Map<String, Value>>, seed: u64) -> Result<DrMethod> {
    let params = params.cloned().unwrap_or_default();
    match name {
        "pca" if params.is_empty() => Ok(DrMethod::Pca),
        "pca" => Err(ApiError::invalid("pca takes no parameters")),
        "isomap" => Ok(DrMethod::Isomap(overlay(
            name,
            IsomapParams {
                bridge: true,
                ..IsomapParams::default()
            },
            params,
        )?)),
        "tsne" => Ok(DrMethod::Tsne(overlay(
            name,
            TsneParams {
                seed,
                ..TsneParams::default()
            },
            params,
        )?)),
        other => Err(ApiError::invalid(format!(
            "unknown dr_method '{other}' (expected pca, isomap or tsne)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub labeled: usize,
    pub unlabeled: usize,
    pub seeds: usize,
    pub assigned: usize,
    pub selections: usize,
}

impl Counters {
    pub fn of(s: &Session) -> Self {
        let l = s.ledger();
        Self {
            labeled: l.labeled_count(),
            unlabeled: l.unlabeled_count(),
            seeds: l.seed_count(),
            assigned: l.assigned_count(),
            selections: s.history().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub id: String,
    pub dataset: DatasetSpec,
    pub dataset_name: String,
    pub n: usize,
    pub dims: usize,
    pub classes: usize,
    pub has_truth: bool,
    pub status: SessionStatus,
    pub created_at: String,
    pub config: SessionConfig,
    pub active_view: usize,
    pub views: usize,
    pub counters: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRanges {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl AxisRanges {
    pub fn of(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut r = AxisRanges {
            x: [f64::INFINITY, f64::NEG_INFINITY],
            y: [f64::INFINITY, f64::NEG_INFINITY],
        };
        for p in points {
            r.x = [r.x[0].min(p[0]), r.x[1].max(p[0])];
            r.y = [r.y[0].min(p[1]), r.y[1].max(p[1])];
        }
        r
    }

    /// Maps raw view coordinates onto [-1, 1] per axis. A flat axis maps to 0.
    pub fn normalize(&self, p: [f64; 2]) -> [f64; 2] {
        [to_unit(p[0], self.x), to_unit(p[1], self.y)]
    }

    pub fn denormalize(&self, p: [f64; 2]) -> [f64; 2] {
        [from_unit(p[0], self.x), from_unit(p[1], self.y)]
    }
}

fn to_unit(v: f64, [lo, hi]: [f64; 2]) -> f64 {
    let span = hi - lo;
    if span > 0.0 {
        2.0 * (v - lo) / span - 1.0
    } else {
        0.0
    }
}

fn from_unit(u: f64, [lo, hi]: [f64; 2]) -> f64 {
    lo + 0.5 * (u + 1.0) * (hi - lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPoint {
    /// Dataset index.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    #[serde(flatten)]
    pub status: LabelStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageSummary {
    pub method: String,
    pub params: Vec<(String, f64)>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPayload {
    pub session_id: String,
    pub view_id: usize,
    pub parent: Option<usize>,
    /// View ids from the root to the active view.
    pub stack: Vec<usize>,
    pub classes: usize,
    pub eta: f64,
    pub finished: bool,
    /// Raw coordinate ranges behind the normalization.
    pub ranges: AxisRanges,
    pub lineage: Vec<LineageSummary>,
    pub points: Vec<ViewPoint>,
}

pub fn active_ranges(s: &Session) -> AxisRanges {
    let e = &s.active_view().embedding;
    AxisRanges::of((0..e.len()).map(|r| e.point(r)))
}

impl ViewPayload {
    pub fn of(s: &Session) -> Self {
        let view = s.active_view();
        let e = &view.embedding;
        let ranges = active_ranges(s);
        let points = e
            .scope()
            .iter()
            .enumerate()
            .map(|(r, &index)| {
                let [x, y] = ranges.normalize(e.point(r));
                ViewPoint {
                    index,
                    x,
                    y,
                    status: s.ledger().status(index),
                }
            })
            .collect();
        ViewPayload {
            session_id: s.id().to_string(),
            view_id: view.id,
            parent: view.parent,
            stack: s.stack().to_vec(),
            classes: s.num_classes(),
            eta: s.config().eta,
            finished: s.is_finished(),
            ranges,
            lineage: e
                .lineage
                .iter()
                .map(|step| LineageSummary {
                    method: step.method.clone(),
                    params: step.params.clone(),
                    size: step.subset.len(),
                })
                .collect(),
            points,
        }
    }
}

/// Body of the selection and commit endpoints. Vertices are in the
/// normalized coordinates of the active view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRequest {
    pub polygon: Vec<[f64; 2]>,
    #[serde(default)]
    pub proposed_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPreview {
    pub view_id: usize,
    pub members: Vec<usize>,
    pub seed_histogram: Vec<usize>,
    pub labeled: usize,
    pub majority: Option<usize>,
    pub purity: Option<f64>,
    pub eta: f64,
    /// Whether a commit would label the members with the majority class.
    pub pure: bool,
}

impl SelectionPreview {
    pub fn new(view_id: usize, eta: f64, r: Resolution) -> Self {
        let pure = r.majority.is_some_and(|m| r.seed_histogram[m] as f64 >= eta * r.labeled as f64);
        Self {
            view_id,
            members: r.members,
            seed_histogram: r.seed_histogram,
            labeled: r.labeled,
            majority: r.majority,
            purity: r.purity,
            eta,
            pure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitResponse {
    pub record: SelectionRecord,
    /// Active view after the commit.
    pub view_id: usize,
    pub session: ApiSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackResponse {
    pub view_id: usize,
    pub session: ApiSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishSummary {
    pub labeled: usize,
    pub unlabeled: usize,
    pub seeds: usize,
    pub assigned: usize,
    pub selections: usize,
    pub unlabeled_rate: f64,
    /// Labeled samples per class.
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishResponse {
    pub summary: FinishSummary,
    pub export_token: String,
    pub session: ApiSession,
}

impl FinishSummary {
    pub fn of(s: &Session) -> Self {
        let c = Counters::of(s);
        let mut class_counts = vec![0; s.num_classes()];
        for c in s.ledger().labels().into_iter().flatten() {
            class_counts[c] += 1;
        }
        Self {
            labeled: c.labeled,
            unlabeled: c.unlabeled,
            seeds: c.seeds,
            assigned: c.assigned,
            selections: c.selections,
            unlabeled_rate: s.ledger().unlabeled_rate(),
            class_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportPayload {
    pub session_id: String,
    pub export_token: String,
    pub count: usize,
    pub labels: Vec<ExportEntry>,
}

pub fn export_csv(entries: &[ExportEntry]) -> String {
    let mut out = String::from("index,class,source\n");
    for e in entries {
        let source = match e.source {
            LabelSource::Seed => "seed",
            LabelSource::Assigned => "assigned",
        };
        out.push_str(&format!("{},{},{}\n", e.index, e.class, source));
    }
    out
}

/// FNV-1a (64-bit) of the CSV export, as 16 hex digits.
pub fn export_token(entries: &[ExportEntry]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in export_csv(entries).bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
