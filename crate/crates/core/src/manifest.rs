//! Append-only JSON-lines event log of scan records and pipeline events.
//!
//! Each line is one [`Event`]. The current state of a scan is its latest
//! snapshot, so replaying the file reconstructs it exactly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{ExclusionReason, ScanRecord, ScanStatus, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp_ms: u64,
    pub stage: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventBody {
    Snapshot {
        record: ScanRecord,
    },
    Stage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scan_id: Option<String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        seeds: BTreeMap<String, u64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        outputs: Vec<PathBuf>,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        detail: String,
    },
}

impl Event {
    pub fn snapshot(stage: &str, config_hash: &str, record: ScanRecord) -> Self {
        Event {
            timestamp_ms: now_ms(),
            stage: stage.into(),
            config_hash: config_hash.into(),
            body: EventBody::Snapshot { record },
        }
    }

    pub fn stage(stage: &str, config_hash: &str, scan_id: Option<&str>) -> Self {
        Event {
            timestamp_ms: now_ms(),
            stage: stage.into(),
            config_hash: config_hash.into(),
            body: EventBody::Stage {
                scan_id: scan_id.map(str::to_string),
                seeds: BTreeMap::new(),
                outputs: Vec::new(),
                detail: String::new(),
            },
        }
    }

    pub fn with_seed(mut self, name: &str, seed: u64) -> Self {
        if let EventBody::Stage { seeds, .. } = &mut self.body {
            seeds.insert(name.into(), seed);
        }
        self
    }

    pub fn with_output(mut self, path: impl Into<PathBuf>) -> Self {
        if let EventBody::Stage { outputs, .. } = &mut self.body {
            outputs.push(path.into());
        }
        self
    }

    pub fn with_detail(mut self, text: impl Into<String>) -> Self {
        if let EventBody::Stage { detail, .. } = &mut self.body {
            *detail = text.into();
        }
        self
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Latest snapshot per scan id.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> BTreeMap<String, ScanRecord> {
    let mut state = BTreeMap::new();
    for e in events {
        if let EventBody::Snapshot { record } = &e.body {
            state.insert(record.scan_id.clone(), record.clone());
        }
    }
    state
}

#[derive(Debug)]
pub struct Manifest {
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<Event>,
    state: BTreeMap<String, ScanRecord>,
}

impl Manifest {
    pub fn in_memory() -> Self {
        Manifest { path: None, file: None, events: Vec::new(), state: BTreeMap::new() }
    }

    /// Opens (creating if needed) the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self> {
        let events = if path.exists() { Self::read_events(path)? } else { Vec::new() };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::unwritable(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::unwritable(path, e))?;
        let state = replay(&events);
        Ok(Manifest { path: Some(path.to_path_buf()), file: Some(file), events, state })
    }

    /// Reads the log at `path` without opening it for writing.
    pub fn load(path: &Path) -> Result<Self> {
        let events = Self::read_events(path)?;
        let state = replay(&events);
        Ok(Manifest { path: Some(path.to_path_buf()), file: None, events, state })
    }

    pub fn read_events(path: &Path) -> Result<Vec<Event>> {
        let f = File::open(path).map_err(|e| Error::unreadable(path, e))?;
        let mut events = Vec::new();
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::unreadable(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|e| Error::unreadable(path, format!("line {}: {e}", n + 1)))?;
            events.push(e);
        }
        Ok(events)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Appends one event, flushing it to disk before returning.
    pub fn append(&mut self, event: Event) -> Result<()> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_vec(&event)?;
            line.push(b'\n');
            let path = self.path.as_deref().unwrap_or(Path::new("manifest"));
            f.write_all(&line).map_err(|e| Error::unwritable(path, e))?;
            f.sync_data().map_err(|e| Error::unwritable(path, e))?;
        } else if self.path.is_some() {
            return Err(Error::unwritable(self.path.as_deref().unwrap(), "manifest opened read-only"));
        }
        if let EventBody::Snapshot { record } = &event.body {
            self.state.insert(record.scan_id.clone(), record.clone());
        }
        self.events.push(event);
        Ok(())
    }

    pub fn record_snapshot(&mut self, stage: &str, config_hash: &str, record: ScanRecord) -> Result<()> {
        self.append(Event::snapshot(stage, config_hash, record))
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn record(&self, scan_id: &str) -> Option<&ScanRecord> {
        self.state.get(scan_id)
    }

    /// Current records in scan id order.
    pub fn records(&self) -> impl Iterator<Item = &ScanRecord> {
        self.state.values()
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    /// Events with timestamps zeroed, for comparing runs.
    pub fn canonical_events(&self) -> Vec<Event> {
        self.events.iter().cloned().map(|mut e| {
            e.timestamp_ms = 0;
            e
        }).collect()
    }
}

/// Records an expert verdict.
///
/// Accepting keeps an included scan included, or restores a scan that was
/// previously rejected by the expert. Rejecting moves an included (or
/// already rejected) scan to excluded with `ExpertRejected`. Scans excluded
/// for any other reason, or not yet processed, cannot receive a verdict.
pub fn apply_verdict(
    manifest: &mut Manifest,
    scan_id: &str,
    verdict: Verdict,
    note: &str,
    config_hash: &str,
) -> Result<ScanRecord> {
    let current = manifest.record(scan_id).ok_or_else(|| Error::UnknownScan(scan_id.to_string()))?;
    let rejected_before = current.exclusion_reason == Some(ExclusionReason::ExpertRejected);
    if current.status != ScanStatus::Included && !rejected_before {
        let why = match current.exclusion_reason {
            Some(r) => format!("scan is excluded ({r})"),
            None => "scan has not been processed".to_string(),
        };
        return Err(Error::VerdictConflict { scan_id: scan_id.to_string(), reason: why });
    }
    let mut next = current.clone();
    match verdict {
        Verdict::Accepted => next.include(),
        Verdict::Rejected => next.exclude(ExclusionReason::ExpertRejected, note),
    }
    next.verdict = Some(verdict);
    next.note = note.to_string();
    manifest.record_snapshot("verdict", config_hash, next.clone())?;
    Ok(next)
}

/// Scan counts per outcome. `included + pending + Σ excluded = total`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub total: usize,
    pub included: usize,
    pub pending: usize,
    pub excluded: BTreeMap<ExclusionReason, usize>,
}

impl Funnel {
    pub fn excluded_total(&self) -> usize {
        self.excluded.values().sum()
    }

    pub fn is_partition(&self) -> bool {
        self.included + self.pending + self.excluded_total() == self.total
    }

    /// Non-zero buckets, e.g. `{"included": 1, "SeedNotFound": 1}`.
    pub fn nonzero(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        if self.included > 0 {
            out.insert("included".to_string(), self.included);
        }
        if self.pending > 0 {
            out.insert("pending".to_string(), self.pending);
        }
        for (r, &n) in &self.excluded {
            if n > 0 {
                out.insert(r.to_string(), n);
            }
        }
        out
    }
}

pub fn report_funnel(manifest: &Manifest) -> Funnel {
    let mut f = Funnel {
        total: 0,
        included: 0,
        pending: 0,
        excluded: ExclusionReason::ALL.iter().map(|&r| (r, 0)).collect(),
    };
    for r in manifest.records() {
        f.total += 1;
        match (r.status, r.exclusion_reason) {
            (ScanStatus::Included, _) => f.included += 1,
            (ScanStatus::Excluded, Some(reason)) => *f.excluded.get_mut(&reason).expect("all reasons") += 1,
            _ => f.pending += 1,
        }
    }
    f
}
