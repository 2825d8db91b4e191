// SPDX-License-Identifier: Apache-2.0

//! The interactive labeling loop: a stack of 2-D views over the dataset, a
//! label ledger, and selection commits gated by evidence purity.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use pvil_core::datasets::{Dataset, PreprocessMode, PreprocessSpec, SeedSplit};
use pvil_core::embed::{DrMethod, Embedding, TsneParams};

use crate::error::{Result, SessionError};
use crate::eventlog::{DatasetRef, Event};
use crate::geometry::{bounding_box, SelectionRegion};
use crate::ledger::LabelLedger;

pub const ETA_RANGE: (f64, f64) = (0.8, 0.9);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub preprocess: PreprocessMode,
    pub method: DrMethod,
    /// Method for child views; the root method when absent.
    pub reproject_method: Option<DrMethod>,
    pub eta: f64,
    /// When off, impure selections are rejected instead of reprojected.
    pub reprojection: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessMode::None,
            method: DrMethod::Pca,
            reproject_method: None,
            eta: 0.85,
            reprojection: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub embedding: Embedding,
    /// Wall time of preprocessing plus reduction, in seconds.
    #[serde(default)]
    pub dr_seconds: f64,
}

impl ViewNode {
    pub fn scope(&self) -> &[usize] {
        self.embedding.scope()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoEvidence,
    ReprojectionDisabled,
    SubsetTooSmall,
    ReprojectionFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Labeled {
        class: usize,
        newly_labeled: usize,
        overridden: bool,
    },
    Reprojected {
        child_view: usize,
    },
    Rejected {
        reason: RejectReason,
    },
}

/// What a polygon selects in the active view, before any commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Dataset indices, ascending.
    pub members: Vec<usize>,
    /// Per-class counts of seed and assigned labels among the members.
    pub seed_histogram: Vec<usize>,
    pub labeled: usize,
    pub majority: Option<usize>,
    /// Majority count over labeled count; absent without evidence.
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub id: usize,
    pub view: usize,
    pub region: SelectionRegion,
    pub members: Vec<usize>,
    pub seed_histogram: Vec<usize>,
    pub proposed_class: Option<usize>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    dataset: Arc<Dataset>,
    dataset_ref: DatasetRef,
    config: SessionConfig,
    split: SeedSplit,
    ledger: LabelLedger,
    views: Vec<ViewNode>,
    stack: Vec<usize>,
    history: Vec<SelectionRecord>,
    events: Vec<Event>,
    finished: bool,
}

/// Preprocesses the rows in `scope` and reduces them to a 2-D view, returning
/// the embedding and the wall time spent.
pub fn reduce_scope(
    dataset: &Dataset,
    mode: PreprocessMode,
    method: &DrMethod,
    scope: Vec<usize>,
) -> pvil_core::Result<(Embedding, f64)> {
    let started = Instant::now();
    let x = if scope.len() == dataset.len() && scope.iter().enumerate().all(|(i, &s)| i == s) {
        dataset.samples.clone()
    } else {
        dataset.samples.select_rows(&scope)
    };
    let x = PreprocessSpec::fit(mode, &x).apply_matrix(&x)?;
    let method = adapt_to_size(method, scope.len());
    let embedding = method.reduce(&x, scope)?;
    Ok((embedding, started.elapsed().as_secs_f64()))
}

/// Small child views cannot support the configured t-SNE perplexity; it is
/// capped just below a third of the subset size.
fn adapt_to_size(method: &DrMethod, n: usize) -> DrMethod {
    match method {
        DrMethod::Tsne(p) => {
            let cap = (n as f64 - 1.0) / 3.0;
            if p.perplexity >= n as f64 / 3.0 && cap > 1.0 {
                DrMethod::Tsne(TsneParams {
                    perplexity: cap.max(1.01),
                    ..*p
                })
            } else {
                method.clone()
            }
        }
        other => other.clone(),
    }
}

impl Session {
    /// Preprocesses and reduces the full dataset, and seeds the ledger with
    /// the ground-truth labels of `split.labeled`.
    pub fn create(id: impl Into<String>, dataset: Arc<Dataset>, config: SessionConfig, split: SeedSplit) -> Result<Self> {
        let dataset_ref = DatasetRef::of(&dataset);
        Self::create_with_ref(id.into(), dataset, dataset_ref, config, split)
    }

    /// Like `create`, recording a caller-supplied dataset reference in the event log.
    pub fn create_with_ref(
        id: String,
        dataset: Arc<Dataset>,
        dataset_ref: DatasetRef,
        config: SessionConfig,
        split: SeedSplit,
    ) -> Result<Self> {
        if !(config.eta >= ETA_RANGE.0 && config.eta <= ETA_RANGE.1) {
            return Err(SessionError::InvalidParameter(format!(
                "eta {} outside [{}, {}]",
                config.eta, ETA_RANGE.0, ETA_RANGE.1
            )));
        }
        if split.n() != dataset.len() {
            return Err(SessionError::InvalidParameter(format!(
                "split covers {} samples but the dataset has {}",
                split.n(),
                dataset.len()
            )));
        }
        let seed_labels: Vec<usize> = split.labeled.iter().map(|&i| dataset.truth[i]).collect();
        let ledger = LabelLedger::from_seeds(&split, &seed_labels)?;
        let (embedding, dr_seconds) =
            reduce_scope(&dataset, config.preprocess, &config.method, (0..dataset.len()).collect())?;
        let events = vec![Event::Create {
            session_id: id.clone(),
            dataset: dataset_ref.clone(),
            config: config.clone(),
            seeds: split.labeled.clone(),
        }];
        Ok(Self {
            id,
            dataset,
            dataset_ref,
            config,
            split,
            ledger,
            views: vec![ViewNode {
                id: 0,
                parent: None,
                embedding,
                dr_seconds,
            }],
            stack: vec![0],
            history: Vec::new(),
            events,
            finished: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn dataset_ref(&self) -> &DatasetRef {
        &self.dataset_ref
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn split(&self) -> &SeedSplit {
        &self.split
    }

    pub fn ledger(&self) -> &LabelLedger {
        &self.ledger
    }

    pub fn history(&self) -> &[SelectionRecord] {
        &self.history
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn num_classes(&self) -> usize {
        self.dataset.num_classes()
    }

    pub fn active_view(&self) -> &ViewNode {
        &self.views[*self.stack.last().expect("view stack is never empty")]
    }

    pub fn view(&self, id: usize) -> Option<&ViewNode> {
        self.views.get(id)
    }

    pub fn views(&self) -> &[ViewNode] {
        &self.views
    }

    /// View ids from the root to the active view.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// Total reduction wall time over every view built so far.
    /// Reduction method that produced view `id`.
    pub fn view_method(&self, id: usize) -> &DrMethod {
        match self.views.get(id).and_then(|v| v.parent) {
            Some(_) => self.config.reproject_method.as_ref().unwrap_or(&self.config.method),
            None => &self.config.method,
        }
    }

    pub fn dr_seconds(&self) -> f64 {
        self.views.iter().map(|v| v.dr_seconds).sum()
    }

    pub fn resolve_selection(&self, region: &SelectionRegion) -> Result<Resolution> {
        let view = self.active_view();
        let coords = &view.embedding.coords;
        let pts: Vec<[f64; 2]> = (0..coords.rows()).map(|r| view.embedding.point(r)).collect();
        let (lo, hi) = bounding_box(&pts);
        let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
        let extent = if w * h > 0.0 { w * h } else { w.max(h).powi(2) };
        if region.area() < 1e-12 * extent {
            return Err(SessionError::EmptySelection("polygon has no area".into()));
        }
        let scope = view.scope();
        let mut members: Vec<usize> = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| region.contains(**p))
            .map(|(r, _)| scope[r])
            .collect();
        if members.is_empty() {
            return Err(SessionError::EmptySelection("no points inside the polygon".into()));
        }
        members.sort_unstable();
        let mut seed_histogram = vec![0; self.num_classes()];
        for &m in &members {
            if let Some(c) = self.ledger.class_of(m) {
                seed_histogram[c] += 1;
            }
        }
        let labeled: usize = seed_histogram.iter().sum();
        let (majority, purity) = if labeled == 0 {
            (None, None)
        } else {
            let mut best = 0;
            for (c, &v) in seed_histogram.iter().enumerate() {
                if v > seed_histogram[best] {
                    best = c;
                }
            }
            (Some(best), Some(seed_histogram[best] as f64 / labeled as f64))
        };
        Ok(Resolution {
            members,
            seed_histogram,
            labeled,
            majority,
            purity,
        })
    }

    /// Applies the purity rule to a selection in the active view.
    pub fn commit_selection(&mut self, region: SelectionRegion, proposed_class: Option<usize>) -> Result<SelectionRecord> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        if let Some(c) = proposed_class {
            if c >= self.num_classes() {
                return Err(SessionError::InvalidParameter(format!(
                    "proposed class {c} >= class count {}",
                    self.num_classes()
                )));
            }
        }
        let res = self.resolve_selection(&region)?;
        let id = self.history.len();
        let view = self.active_view().id;
        let pure = match res.majority {
            Some(m) => (res.seed_histogram[m] as f64) >= self.config.eta * res.labeled as f64,
            None => false,
        };
        let outcome = if pure || (res.labeled == 0 && proposed_class.is_some()) {
            let class = proposed_class.or(res.majority).expect("labeled outcome has a class");
            let mut newly_labeled = 0;
            for &m in &res.members {
                if self.ledger.class_of(m).is_none() && self.ledger.assign(m, class, id)? {
                    newly_labeled += 1;
                }
            }
            Outcome::Labeled {
                class,
                newly_labeled,
                overridden: res.majority != Some(class),
            }
        } else if res.labeled == 0 {
            Outcome::Rejected {
                reason: RejectReason::NoEvidence,
            }
        } else if !self.config.reprojection {
            Outcome::Rejected {
                reason: RejectReason::ReprojectionDisabled,
            }
        } else if res.members.len() < 3 {
            Outcome::Rejected {
                reason: RejectReason::SubsetTooSmall,
            }
        } else {
            match self.push_child(res.members.clone()) {
                Ok(child_view) => Outcome::Reprojected { child_view },
                Err(err) => {
                    log::warn!("reprojection of {} samples failed: {err}", res.members.len());
                    Outcome::Rejected {
                        reason: RejectReason::ReprojectionFailed,
                    }
                }
            }
        };
        let record = SelectionRecord {
            id,
            view,
            region,
            members: res.members,
            seed_histogram: res.seed_histogram,
            proposed_class,
            outcome,
        };
        self.events.push(Event::Commit {
            selection: id,
            view,
            polygon: record.region.clone(),
            proposed_class,
            outcome,
        });
        if let Outcome::Reprojected { child_view } = outcome {
            self.events.push(Event::Reproject {
                selection: Some(id),
                child_view,
                size: record.members.len(),
                members: None,
            });
        }
        self.history.push(record.clone());
        Ok(record)
    }

    fn push_child(&mut self, members: Vec<usize>) -> Result<usize> {
        if members.len() < 3 {
            return Err(SessionError::SubsetTooSmall { size: members.len() });
        }
        let parent = self.active_view();
        let parent_id = parent.id;
        let parent_lineage = parent.embedding.lineage.clone();
        let method = self.config.reproject_method.as_ref().unwrap_or(&self.config.method);
        let (embedding, dr_seconds) = reduce_scope(&self.dataset, self.config.preprocess, method, members)?;
        let id = self.views.len();
        self.views.push(ViewNode {
            id,
            parent: Some(parent_id),
            embedding: embedding.with_parent_lineage(&parent_lineage),
            dr_seconds,
        });
        self.stack.push(id);
        Ok(id)
    }

    /// Re-runs preprocessing and reduction on `members` alone and makes the
    /// result the active view.
    pub fn reproject_subset(&mut self, members: &[usize]) -> Result<usize> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        let scope = self.active_view().scope();
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&bad) = sorted.iter().find(|m| scope.binary_search(m).is_err()) {
            return Err(SessionError::InvalidParameter(format!("sample {bad} is not in the active view")));
        }
        let child_view = self.push_child(sorted.clone())?;
        self.events.push(Event::Reproject {
            selection: None,
            child_view,
            size: sorted.len(),
            members: Some(sorted),
        });
        Ok(child_view)
    }

    /// Returns to the parent of the active view.
    pub fn back(&mut self) -> Result<usize> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        if self.stack.len() == 1 {
            return Err(SessionError::AtRoot);
        }
        self.stack.pop();
        let view = self.active_view().id;
        self.events.push(Event::Back { view });
        Ok(view)
    }

    /// Marks the session finished. Repeated calls change nothing.
    pub fn finish(&mut self) -> &LabelLedger {
        if !self.finished {
            self.finished = true;
            self.events.push(Event::Finish {
                labeled: self.ledger.labeled_count(),
                unlabeled: self.ledger.unlabeled_count(),
            });
        }
        &self.ledger
    }

    pub fn export_labels(&self) -> Result<Vec<crate::ledger::ExportEntry>> {
        if !self.finished {
            return Err(SessionError::NotFinished);
        }
        Ok(self.ledger.export())
    }

    /// Rebuilds a session from its event log against the same dataset,
    /// checking every recorded outcome along the way.
    pub fn replay(events: &[Event], dataset: Arc<Dataset>) -> Result<Self> {
        let mismatch = |event: usize, reason: String| SessionError::ReplayMismatch { event, reason };
        let mut session = match events.first() {
            Some(Event::Create {
                session_id,
                dataset: dref,
                config,
                seeds,
            }) => {
                if dref.n != dataset.len() || dref.name != dataset.name {
                    return Err(mismatch(
                        0,
                        format!("log is for {} (n = {}), got {} (n = {})", dref.name, dref.n, dataset.name, dataset.len()),
                    ));
                }
                let split = SeedSplit::from_labeled(dataset.len(), seeds.clone())?;
                Session::create_with_ref(session_id.clone(), dataset, dref.clone(), config.clone(), split)?
            }
            _ => return Err(SessionError::EventLog("log does not start with a create event".into())),
        };
        for (k, ev) in events.iter().enumerate().skip(1) {
            match ev {
                Event::Create { .. } => return Err(mismatch(k, "second create event".into())),
                Event::Commit {
                    selection,
                    view,
                    polygon,
                    proposed_class,
                    outcome,
                } => {
                    if session.active_view().id != *view {
                        return Err(mismatch(k, format!("active view {} != logged {view}", session.active_view().id)));
                    }
                    let rec = session.commit_selection(polygon.clone(), *proposed_class)?;
                    if rec.id != *selection || rec.outcome != *outcome {
                        return Err(mismatch(k, format!("outcome {:?} != logged {outcome:?}", rec.outcome)));
                    }
                }
                Event::Reproject {
                    child_view,
                    size,
                    members,
                    ..
                } => {
                    if let Some(members) = members {
                        session.reproject_subset(members)?;
                    }
                    if session.active_view().id != *child_view || session.active_view().scope().len() != *size {
                        return Err(mismatch(k, "reprojection produced a different child view".into()));
                    }
                }
                Event::Back { view } => {
                    if session.back()? != *view {
                        return Err(mismatch(k, "back landed on a different view".into()));
                    }
                }
                Event::Finish { .. } => {
                    session.finish();
                }
            }
        }
        session.events = events.to_vec();
        Ok(session)
    }
}

impl DatasetRef {
    pub fn of(ds: &Dataset) -> Self {
        DatasetRef {
            name: ds.name.clone(),
            n: ds.len(),
            provenance: ds.provenance.clone(),
        }
    }
}
