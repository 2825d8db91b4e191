// SPDX-License-Identifier: Apache-2.0

//! Append-only session event log, one JSON object per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use pvil_core::datasets::Provenance;

use crate::error::{Result, SessionError};
use crate::geometry::SelectionRegion;
use crate::session::{Outcome, SessionConfig};

/// Enough to find the dataset again when a log is replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub n: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Create {
        session_id: String,
        dataset: DatasetRef,
        config: SessionConfig,
        seeds: Vec<usize>,
    },
    Commit {
        selection: usize,
        view: usize,
        polygon: SelectionRegion,
        proposed_class: Option<usize>,
        outcome: Outcome,
    },
    Reproject {
        /// The commit that triggered it; absent for direct reprojections,
        /// which carry their member list instead.
        selection: Option<usize>,
        child_view: usize,
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        members: Option<Vec<usize>>,
    },
    Back {
        view: usize,
    },
    Finish {
        labeled: usize,
        unlabeled: usize,
    },
}

pub fn write_events(w: &mut impl Write, events: &[Event]) -> Result<()> {
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| SessionError::EventLog(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| SessionError::EventLog(e.to_string()))?;
    }
    Ok(())
}

pub fn read_events(r: impl Read) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| SessionError::EventLog(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line)
            .map_err(|e| SessionError::EventLog(format!("line {}: {e}", lineno + 1)))?;
        out.push(ev);
    }
    Ok(out)
}

/// Appends events to a log file, creating it when missing.
pub fn append_events(path: impl AsRef<Path>, events: &[Event]) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path.as_ref())
        .map_err(|e| SessionError::EventLog(format!("{}: {e}", path.as_ref().display())))?;
    let mut w = BufWriter::new(file);
    write_events(&mut w, events)?;
    w.flush().map_err(|e| SessionError::EventLog(e.to_string()))
}

pub fn read_event_file(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    let file = File::open(path.as_ref()).map_err(|e| SessionError::EventLog(format!("{}: {e}", path.as_ref().display())))?;
    read_events(file)
}
