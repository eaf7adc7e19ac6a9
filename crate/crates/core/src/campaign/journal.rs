// SPDX-License-Identifier: Apache-2.0

//! Append-only JSON-lines journal of attempt records.
//!
//! A key may appear more than once (an infrastructure failure followed by a
//! successful rerun); the last line for a key is authoritative.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::generate::GenerationRecord;
use super::CampaignError;
use crate::scoring::HqiScore;
use crate::taxonomy::FailureTag;
use crate::toolchain::{GateTrace, InfraError, SynthOutcome};

pub const JOURNAL_SCHEMA: u32 = 1;

pub fn attempt_key(model: &str, task: &str, attempt: u32) -> String {
    format!("{model}/{task}/{attempt}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LibraryOutcome {
    Synthesized(SynthOutcome),
    Infrastructure(InfraError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Evaluated {
        gates: GateTrace,
        /// Alternate-library re-synthesis of designs that passed every gate.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        libraries: BTreeMap<String, LibraryOutcome>,
        hqi: HqiScore,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failure: Option<FailureTag>,
    },
    /// No verdict could be reached; the attempt is re-run on resume.
    Infrastructure { error: InfraError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub schema: u32,
    pub key: String,
    pub model: String,
    pub task: String,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationRecord>,
    pub outcome: AttemptOutcome,
    pub started_ms: u64,
    pub finished_ms: u64,
}

impl AttemptRecord {
    pub fn is_infrastructure(&self) -> bool {
        matches!(self.outcome, AttemptOutcome::Infrastructure { .. })
    }

    pub fn gates(&self) -> Option<&GateTrace> {
        match &self.outcome {
            AttemptOutcome::Evaluated { gates, .. } => Some(gates),
            AttemptOutcome::Infrastructure { .. } => None,
        }
    }

    fn sort_key(&self) -> (&str, &str, u32) {
        (&self.model, &self.task, self.attempt)
    }
}

/// Milliseconds since the epoch; frozen in deterministic runs.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

pub struct FrozenClock(pub u64);

impl Clock for FrozenClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

/// Parsed journal: the authoritative record per key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JournalSnapshot {
    pub latest: BTreeMap<String, AttemptRecord>,
    pub lines: usize,
}

impl JournalSnapshot {
    /// Records in canonical (model, task, attempt) order.
    pub fn canonical(&self) -> Vec<&AttemptRecord> {
        let mut v: Vec<_> = self.latest.values().collect();
        v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        v
    }

    pub fn is_done(&self, key: &str) -> bool {
        self.latest.get(key).is_some_and(|r| !r.is_infrastructure())
    }

    pub fn infrastructure(&self) -> impl Iterator<Item = &AttemptRecord> {
        self.latest.values().filter(|r| r.is_infrastructure())
    }
}

/// Canonical serialization: one JSON line per key, sorted.
pub fn canonical_text(snapshot: &JournalSnapshot) -> String {
    snapshot
        .canonical()
        .into_iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

/// Reads the journal. A trailing line without a newline that does not parse
/// is an interrupted write: it is ignored and, if `repair` is set, cut off.
/// Any other malformed line is an error.
pub fn read_journal(path: &Path, repair: bool) -> Result<JournalSnapshot, CampaignError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(JournalSnapshot::default()),
        Err(e) => return Err(CampaignError::io(path, e)),
    };
    let mut snap = JournalSnapshot::default();
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim_end();
        if body.is_empty() {
            offset += line.len();
            continue;
        }
        match serde_json::from_str::<AttemptRecord>(body) {
            Ok(r) if r.schema == JOURNAL_SCHEMA => {
                snap.lines += 1;
                snap.latest.insert(r.key.clone(), r);
            }
            Ok(r) => {
                return Err(CampaignError::Journal {
                    path: path.to_path_buf(),
                    line: n + 1,
                    reason: format!("unsupported schema {}", r.schema),
                })
            }
            Err(_) if !complete => {
                log::warn!("{}: dropping interrupted trailing record", path.display());
                if repair {
                    let f = OpenOptions::new().write(true).open(path).map_err(|e| CampaignError::io(path, e))?;
                    f.set_len(offset as u64).map_err(|e| CampaignError::io(path, e))?;
                }
                break;
            }
            Err(e) => {
                return Err(CampaignError::Journal {
                    path: path.to_path_buf(),
                    line: n + 1,
                    reason: e.to_string(),
                })
            }
        }
        offset += line.len();
    }
    Ok(snap)
}

/// Appends whole lines; each record is flushed before the next is accepted.
pub struct JournalWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JournalWriter {
    pub fn open(path: &Path) -> Result<Self, CampaignError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CampaignError::io(dir, e))?;
        }
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CampaignError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
        })
    }

    pub fn append(&mut self, record: &AttemptRecord) -> Result<(), CampaignError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| CampaignError::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(model: &str, attempt: u32, infra: bool) -> AttemptRecord {
        let outcome = if infra {
            AttemptOutcome::Infrastructure {
                error: InfraError::new("synth", "spawn failed"),
            }
        } else {
            AttemptOutcome::Evaluated {
                gates: GateTrace::syntax_failure("x"),
                libraries: BTreeMap::new(),
                hqi: HqiScore::Failed,
                failure: None,
            }
        };
        AttemptRecord {
            schema: JOURNAL_SCHEMA,
            key: attempt_key(model, "t", attempt),
            model: model.into(),
            task: "t".into(),
            attempt,
            generation: None,
            outcome,
            started_ms: 0,
            finished_ms: 0,
        }
    }

    #[test]
    fn latest_record_wins_and_canonical_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        let mut w = JournalWriter::open(&p).unwrap();
        for r in [rec("b", 1, false), rec("a", 2, true), rec("a", 1, false), rec("a", 2, false)] {
            w.append(&r).unwrap();
        }
        let s = read_journal(&p, false).unwrap();
        assert_eq!(s.lines, 4);
        assert_eq!(s.latest.len(), 3);
        assert!(s.is_done("a/t/2"));
        let keys: Vec<_> = s.canonical().iter().map(|r| r.key.clone()).collect();
        assert_eq!(keys, ["a/t/1", "a/t/2", "b/t/1"]);
    }

    #[test]
    fn interrupted_tail_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        JournalWriter::open(&p).unwrap().append(&rec("a", 1, false)).unwrap();
        let good = fs::read_to_string(&p).unwrap();
        fs::write(&p, format!("{good}{{\"schema\":1,\"key\":\"a/t")).unwrap();
        assert_eq!(read_journal(&p, true).unwrap().latest.len(), 1);
        assert_eq!(fs::read_to_string(&p).unwrap(), good);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.jsonl");
        fs::write(&p, "garbage\n").unwrap();
        assert!(matches!(read_journal(&p, false), Err(CampaignError::Journal { line: 1, .. })));
    }

    #[test]
    fn missing_journal_is_empty() {
        let s = read_journal(Path::new("/nonexistent/j.jsonl"), false).unwrap();
        assert!(s.latest.is_empty());
    }
}
