// SPDX-License-Identifier: Apache-2.0

//! Golden reference metrics, produced by the same gate path as candidates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::exec::map_ordered;
use crate::task::Task;
use crate::toolchain::{
    run_gates, synthesize_all_libraries, Backend, InfraError, SimVerdict, SynthMetrics, SynthOutcome, SyntaxGate,
    ToolchainConfig,
};

pub const GOLDEN_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GoldenEntry {
    /// Metrics per library that synthesized; the default library is always
    /// present.
    Valid {
        libraries: BTreeMap<String, SynthMetrics>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        library_failures: BTreeMap<String, String>,
    },
    /// The golden did not clear its own gates; the task counts for coverage only.
    Invalid { stage: String, reason: String },
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCache {
    pub schema: u32,
    pub default_library: String,
    pub entries: BTreeMap<String, GoldenEntry>,
}

impl GoldenCache {
    pub fn metrics(&self, task: &str, library: &str) -> Option<&SynthMetrics> {
        match self.entries.get(task)? {
            GoldenEntry::Valid { libraries, .. } => libraries.get(library),
            _ => None,
        }
    }

    pub fn default_metrics(&self, task: &str) -> Option<&SynthMetrics> {
        self.metrics(task, &self.default_library)
    }

    pub fn valid_tasks(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, e)| matches!(e, GoldenEntry::Valid { .. }))
            .map(|(t, _)| t.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cache serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), CampaignError> {
        std::fs::write(path, self.to_json()).map_err(|e| CampaignError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        let cache: GoldenCache = serde_json::from_str(&text).map_err(|e| CampaignError::config(path, e))?;
        if cache.schema != GOLDEN_SCHEMA {
            return Err(CampaignError::config(path, format!("unsupported golden cache schema {}", cache.schema)));
        }
        Ok(cache)
    }
}

fn golden_entry(task: &Task, backend: &dyn Backend, cfg: &ToolchainConfig) -> Result<GoldenEntry, InfraError> {
    let Some(golden) = &task.golden else {
        return Ok(GoldenEntry::Absent);
    };
    let label = format!("golden/{}", task.id);
    let trace = run_gates(golden, task, backend, cfg, &label)?;
    let invalid = |stage: &str, reason: String| {
        Ok(GoldenEntry::Invalid {
            stage: stage.into(),
            reason,
        })
    };
    if let SyntaxGate::Fail { diagnostics } = &trace.syntax {
        return invalid("syntax", diagnostics.clone());
    }
    match &trace.synth {
        Some(SynthOutcome::Error { diagnostics }) => return invalid("synth", diagnostics.clone()),
        Some(SynthOutcome::Timeout { elapsed_s }) => return invalid("synth", format!("timeout after {elapsed_s:.1} s")),
        _ => {}
    }
    if let Some(sim) = &trace.sim {
        if let SimVerdict::Fail { reason } = &sim.verdict {
            return invalid("sim", reason.clone());
        }
    }
    let (Some(metrics), Some(top)) = (trace.passing_metrics(), trace.top.as_deref()) else {
        return invalid("gates", "golden did not clear every gate".into());
    };
    let mut libraries = BTreeMap::from([(cfg.default_library.clone(), metrics.clone())]);
    let mut library_failures = BTreeMap::new();
    let alternates: Vec<String> = cfg.all_libraries().into_iter().skip(1).collect();
    for (lib, outcome) in synthesize_all_libraries(golden, top, &alternates, backend, cfg.synth_timeout(), &label) {
        match outcome? {
            SynthOutcome::Ok { metrics } => {
                libraries.insert(lib, metrics);
            }
            SynthOutcome::Error { diagnostics } => {
                library_failures.insert(lib, diagnostics);
            }
            SynthOutcome::Timeout { elapsed_s } => {
                library_failures.insert(lib, format!("timeout after {elapsed_s:.1} s"));
            }
        }
    }
    Ok(GoldenEntry::Valid {
        libraries,
        library_failures,
    })
}

/// Runs every golden through the gates and all configured libraries. Golden
/// design failures are recorded as invalid entries; only backend trouble is
/// an error.
pub fn compute_golden_metrics(
    tasks: &[Task],
    backend: &dyn Backend,
    cfg: &ToolchainConfig,
    workers: usize,
) -> Result<GoldenCache, InfraError> {
    let entries = map_ordered(tasks, workers, |t| golden_entry(t, backend, cfg).map(|e| (t.id.clone(), e)));
    Ok(GoldenCache {
        schema: GOLDEN_SCHEMA,
        default_library: cfg.default_library.clone(),
        entries: entries.into_iter().collect::<Result<_, _>>()?,
    })
}
