// SPDX-License-Identifier: Apache-2.0

//! Live sessions and their on-disk event logs.
//!
//! Every session keeps its last committed state behind an `Arc`. Reads clone
//! the `Arc` and never wait on a mutation. Mutations are serialized per
//! session: the writer works on a copy, appends the new events to the log,
//! and only then publishes the copy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use pvil_core::datasets::make_split;
use pvil_session::eventlog::{append_events, read_event_file};
use pvil_session::Session;

use crate::datasets::{carries_truth, Catalog, DatasetSpec};
use crate::error::{ApiError, Result};
use crate::payload::{ApiSession, Counters, CreateSession, SessionStatus};

/// Stored next to each event log as `<id>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub dataset: DatasetSpec,
    pub created_at: String,
}

pub struct Entry {
    pub meta: SessionMeta,
    current: RwLock<Arc<Session>>,
    writer: tokio::sync::Mutex<()>,
}

impl Entry {
    fn new(meta: SessionMeta, session: Session) -> Self {
        Self {
            meta,
            current: RwLock::new(Arc::new(session)),
            writer: tokio::sync::Mutex::new(()),
        }
    }

    /// The last committed state.
    pub fn snapshot(&self) -> Arc<Session> {
        self.current.read().unwrap().clone()
    }

    pub fn api(&self, s: &Session) -> ApiSession {
        let ds = s.dataset();
        ApiSession {
            id: self.meta.id.clone(),
            dataset: self.meta.dataset.clone(),
            dataset_name: ds.name.clone(),
            n: ds.len(),
            dims: ds.dims(),
            classes: s.num_classes(),
            has_truth: carries_truth(&ds.provenance),
            status: if s.is_finished() {
                SessionStatus::Finished
            } else {
                SessionStatus::Active
            },
            created_at: self.meta.created_at.clone(),
            config: s.config().clone(),
            active_view: s.active_view().id,
            views: s.views().len(),
            counters: Counters::of(s),
        }
    }
}

pub struct AppState {
    catalog: Catalog,
    sessions_dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ApiError {
    ApiError::internal(format!("{}: {e}", path.display()))
}

fn id_number(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

impl AppState {
    /// State without persistence.
    pub fn in_memory(mnist_dir: PathBuf) -> Self {
        Self {
            catalog: Catalog::new(None, mnist_dir),
            sessions_dir: None,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    /// State persisted under `data_dir`, restoring every session logged there.
    pub fn open(data_dir: &Path, mnist_dir: PathBuf) -> Result<Self> {
        let sessions_dir = data_dir.join("sessions");
        for d in [data_dir.join("datasets"), sessions_dir.clone()] {
            std::fs::create_dir_all(&d).map_err(|e| io_err(&d, e))?;
        }
        let state = Self {
            catalog: Catalog::new(Some(data_dir.to_path_buf()), mnist_dir),
            sessions_dir: Some(sessions_dir),
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        };
        let restored = state.restore()?;
        log::info!("restored {restored} session(s) from {}", data_dir.display());
        Ok(state)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.sessions_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn meta_path(&self, id: &str) -> Option<PathBuf> {
        self.sessions_dir.as_ref().map(|d| d.join(format!("{id}.meta.json")))
    }

    fn restore(&self) -> Result<usize> {
        let Some(dir) = &self.sessions_dir else {
            return Ok(0);
        };
        let mut metas: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".meta.json")))
            .collect();
        metas.sort();
        let mut count = 0;
        for path in metas {
            match self.restore_one(&path) {
                Ok(()) => count += 1,
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(count)
    }

    fn restore_one(&self, meta_path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(meta_path).map_err(|e| io_err(meta_path, e))?;
        let meta: SessionMeta = serde_json::from_str(&text).map_err(|e| io_err(meta_path, e))?;
        let ds = self.catalog.resolve(&meta.dataset)?;
        let log = self.log_path(&meta.id).expect("persistent state has a log directory");
        let events = read_event_file(&log)?;
        let session = Session::replay(&events, Arc::new(ds))?;
        if let Some(n) = id_number(&meta.id) {
            self.next_id.fetch_max(n + 1, Ordering::SeqCst);
        }
        let id = meta.id.clone();
        self.sessions.write().unwrap().insert(id, Arc::new(Entry::new(meta, session)));
        Ok(())
    }

    pub fn entry(&self, id: &str) -> Result<Arc<Entry>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session '{id}'")))
    }

    pub fn entries(&self) -> Vec<Arc<Entry>> {
        self.sessions.read().unwrap().values().cloned().collect()
    }

    /// Builds the dataset, split and root view, then persists and registers
    /// the session.
    pub async fn create(self: &Arc<Self>, req: CreateSession) -> Result<Arc<Entry>> {
        let config = req.config()?;
        let id = format!("s{:04}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let state = self.clone();
        let sid = id.clone();
        let dataset = req.dataset.clone();
        let (r_unlabeled, seed) = (req.r_unlabeled, req.seed);
        let session = tokio::task::spawn_blocking(move || -> Result<Session> {
            let ds = state.catalog.resolve(&dataset)?;
            let split = make_split(&ds, r_unlabeled, seed)?;
            Ok(Session::create(sid, Arc::new(ds), config, split)?)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        let meta = SessionMeta {
            id: id.clone(),
            dataset: req.dataset,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        if let (Some(mp), Some(lp)) = (self.meta_path(&id), self.log_path(&id)) {
            let text = serde_json::to_string_pretty(&meta).map_err(|e| ApiError::internal(e.to_string()))?;
            std::fs::write(&mp, text).map_err(|e| io_err(&mp, e))?;
            append_events(&lp, session.events())?;
        }
        let entry = Arc::new(Entry::new(meta, session));
        self.sessions.write().unwrap().insert(id, entry.clone());
        Ok(entry)
    }

    /// Applies `f` to a copy of the session. On success the new events are
    /// logged and the copy becomes the committed state; on error nothing changes.
    pub async fn mutate<T: Send + 'static>(
        self: &Arc<Self>,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T> + Send + 'static,
    ) -> Result<(Arc<Entry>, T, Arc<Session>)> {
        let entry = self.entry(id)?;
        let _guard = entry.writer.lock().await;
        let mut next = (*entry.snapshot()).clone();
        let log = self.log_path(id);
        let (out, next) = tokio::task::spawn_blocking(move || -> Result<(T, Session)> {
            let before = next.events().len();
            let out = f(&mut next)?;
            if let Some(log) = log {
                if next.events().len() > before {
                    append_events(&log, &next.events()[before..])?;
                }
            }
            Ok((out, next))
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        let next = Arc::new(next);
        *entry.current.write().unwrap() = next.clone();
        drop(_guard);
        Ok((entry, out, next))
    }
}
