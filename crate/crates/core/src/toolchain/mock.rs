// SPDX-License-Identifier: Apache-2.0

//! Table-driven backend. Each entry is selected by a marker substring in the
//! design text; the first matching entry wins, then the optional default.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, InfraError, Invocation, SimTranscript, SynthMetrics, SynthOutcome, SyntaxOutcome};
use crate::frontend::VerilogSource;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockTables {
    #[serde(default, rename = "entry")]
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub default: Option<MockEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEntry {
    #[serde(default)]
    pub marker: String,
    #[serde(default)]
    pub syntax: MockSyntax,
    /// Keyed by library id.
    #[serde(default)]
    pub synth: BTreeMap<String, MockSynth>,
    #[serde(default)]
    pub sim: MockSim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSyntax {
    #[serde(default = "yes")]
    pub ok: bool,
    #[serde(default)]
    pub diagnostics: String,
}

impl Default for MockSyntax {
    fn default() -> Self {
        Self {
            ok: true,
            diagnostics: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockSynthKind {
    Ok,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSynth {
    pub kind: MockSynthKind,
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub warnings: u64,
    #[serde(default)]
    pub diagnostics: String,
    /// Real time spent before answering. Longer than the budget means the
    /// call sleeps for the budget and reports a timeout.
    #[serde(default)]
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSim {
    #[serde(default)]
    pub stdout: String,
    #[serde(default = "yes")]
    pub exit_ok: bool,
    /// Reported wall time; kept fixed so transcripts stay reproducible.
    #[serde(default)]
    pub wall_time_s: f64,
    #[serde(default)]
    pub latency_s: f64,
}

impl Default for MockSim {
    fn default() -> Self {
        Self {
            stdout: String::new(),
            exit_ok: true,
            wall_time_s: 0.0,
            latency_s: 0.0,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    tables: MockTables,
}

impl MockBackend {
    pub fn new(tables: MockTables) -> Self {
        Self { tables }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        Ok(Self::new(toml::from_str(text)?))
    }

    pub fn from_file(path: &Path) -> Result<Self, InfraError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InfraError::new("mock", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| InfraError::new("mock", format!("{}: {e}", path.display())))
    }

    fn entry(&self, design: &VerilogSource) -> Result<&MockEntry, InfraError> {
        self.tables
            .entries
            .iter()
            .find(|e| !e.marker.is_empty() && design.text.contains(&e.marker))
            .or(self.tables.default.as_ref())
            .ok_or_else(|| InfraError::new("mock", format!("no mock entry matches `{}`", design.origin)))
    }
}

/// Sleeps for `latency` capped at `budget`; true when the budget ran out.
fn spend(latency: f64, budget: Duration) -> (bool, f64) {
    if latency <= 0.0 {
        return (false, 0.0);
    }
    let wanted = Duration::from_secs_f64(latency);
    let start = Instant::now();
    std::thread::sleep(wanted.min(budget));
    (wanted > budget, start.elapsed().as_secs_f64())
}

impl Backend for MockBackend {
    fn check_syntax(&self, _: Invocation<'_>, design: &VerilogSource) -> Result<SyntaxOutcome, InfraError> {
        let e = self.entry(design)?;
        Ok(SyntaxOutcome {
            ok: e.syntax.ok,
            diagnostics: e.syntax.diagnostics.clone(),
        })
    }

    fn synthesize(
        &self,
        _: Invocation<'_>,
        design: &VerilogSource,
        _top: &str,
        library: &str,
        timeout: Duration,
    ) -> Result<SynthOutcome, InfraError> {
        let e = self.entry(design)?;
        let row = e
            .synth
            .get(library)
            .ok_or_else(|| InfraError::new("mock", format!("no synthesis table for library `{library}`")))?;
        let (expired, elapsed) = spend(row.latency_s, timeout);
        if expired {
            return Ok(SynthOutcome::Timeout { elapsed_s: elapsed });
        }
        Ok(match row.kind {
            MockSynthKind::Ok => SynthOutcome::Ok {
                metrics: SynthMetrics {
                    area: row.area,
                    delay: row.delay,
                    warnings: row.warnings,
                    library_id: library.to_string(),
                },
            },
            MockSynthKind::Error => SynthOutcome::Error {
                diagnostics: row.diagnostics.clone(),
            },
            MockSynthKind::Timeout => SynthOutcome::Timeout {
                elapsed_s: timeout.as_secs_f64(),
            },
        })
    }

    fn simulate(
        &self,
        _: Invocation<'_>,
        design: &VerilogSource,
        _testbench: &str,
        timeout: Duration,
    ) -> Result<SimTranscript, InfraError> {
        let e = self.entry(design)?;
        let (expired, elapsed) = spend(e.sim.latency_s, timeout);
        Ok(SimTranscript {
            stdout: e.sim.stdout.clone(),
            exit_ok: e.sim.exit_ok && !expired,
            timed_out: expired,
            wall_time_s: if expired { elapsed } else { e.sim.wall_time_s },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sleeping_beyond_budget_times_out() {
        let b = MockBackend::from_toml(
            r#"
[default]
synth.lib = { kind = "ok", area = 1.0, latency_s = 5.0 }
"#,
        )
        .unwrap();
        let budget = Duration::from_millis(50);
        let out = b
            .synthesize(Invocation { label: "x" }, &VerilogSource::new("module m; endmodule", "t"), "m", "lib", budget)
            .unwrap();
        match out {
            SynthOutcome::Timeout { elapsed_s } => assert!(elapsed_s >= budget.as_secs_f64()),
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn latency_within_budget_still_answers() {
        let b = MockBackend::from_toml(
            r#"
[default]
synth.lib = { kind = "ok", area = 1.0, latency_s = 0.01 }
"#,
        )
        .unwrap();
        let out = b
            .synthesize(Invocation { label: "x" }, &VerilogSource::new("m", "t"), "m", "lib", Duration::from_secs(5))
            .unwrap();
        assert!(out.is_ok());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(MockBackend::from_toml("[[entry]]\nmarkr = \"x\"").is_err());
    }
}
