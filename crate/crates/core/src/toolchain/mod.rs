// SPDX-License-Identifier: Apache-2.0

//! The three sequential gates (syntax, synthesis, simulation) and the
//! backends that execute them.

mod external;
mod judge;
mod mock;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{self, VerilogSource};
use crate::task::Task;

pub use external::{AuditEntry, ExternalTools, ExternalToolsConfig};
pub use judge::{judge_simulation, SimVerdict, DEFAULT_FAIL_PATTERNS, DEFAULT_PASS_PATTERNS};
pub use mock::{MockBackend, MockEntry, MockSim, MockSynth, MockSynthKind, MockSyntax, MockTables};

/// Post-synthesis figures for one (design, library) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetrics {
    /// Library area units.
    pub area: f64,
    /// Critical-path delay in ns.
    pub delay: f64,
    pub warnings: u64,
    pub library_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SynthOutcome {
    Ok { metrics: SynthMetrics },
    Error { diagnostics: String },
    Timeout { elapsed_s: f64 },
}

impl SynthOutcome {
    pub fn metrics(&self) -> Option<&SynthMetrics> {
        match self {
            SynthOutcome::Ok { metrics } => Some(metrics),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, SynthOutcome::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxOutcome {
    pub ok: bool,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTranscript {
    pub stdout: String,
    pub exit_ok: bool,
    #[serde(default)]
    pub timed_out: bool,
    pub wall_time_s: f64,
}

/// Evaluator-side failure: a tool could not be run at all. Never counted
/// against the model.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{stage}: {message}")]
pub struct InfraError {
    pub stage: String,
    pub message: String,
}

impl InfraError {
    pub fn new(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            message: message.into(),
        }
    }
}

/// Identifies one backend call; backends that need scratch space derive
/// their directory from it.
#[derive(Debug, Clone, Copy)]
pub struct Invocation<'a> {
    pub label: &'a str,
}

pub trait Backend: Send + Sync {
    fn check_syntax(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
    ) -> Result<SyntaxOutcome, InfraError>;

    fn synthesize(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        top: &str,
        library: &str,
        timeout: Duration,
    ) -> Result<SynthOutcome, InfraError>;

    fn simulate(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        testbench: &str,
        timeout: Duration,
    ) -> Result<SimTranscript, InfraError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainConfig {
    pub default_library: String,
    /// Additional libraries used for re-synthesis of passing designs.
    #[serde(default)]
    pub alternate_libraries: Vec<String>,
    #[serde(default = "default_synth_timeout")]
    pub synth_timeout_s: f64,
    #[serde(default = "default_sim_timeout")]
    pub sim_timeout_s: f64,
    #[serde(default = "default_pass_patterns")]
    pub pass_patterns: Vec<String>,
    #[serde(default = "default_fail_patterns")]
    pub fail_patterns: Vec<String>,
    #[serde(default = "default_warning_prefixes")]
    pub warning_prefixes: Vec<String>,
}

fn default_synth_timeout() -> f64 {
    30.0
}
fn default_sim_timeout() -> f64 {
    60.0
}
fn default_pass_patterns() -> Vec<String> {
    DEFAULT_PASS_PATTERNS.iter().map(|s| s.to_string()).collect()
}
fn default_fail_patterns() -> Vec<String> {
    DEFAULT_FAIL_PATTERNS.iter().map(|s| s.to_string()).collect()
}
fn default_warning_prefixes() -> Vec<String> {
    vec!["Warning".to_string()]
}

impl ToolchainConfig {
    pub fn new(default_library: impl Into<String>) -> Self {
        Self {
            default_library: default_library.into(),
            alternate_libraries: Vec::new(),
            synth_timeout_s: default_synth_timeout(),
            sim_timeout_s: default_sim_timeout(),
            pass_patterns: default_pass_patterns(),
            fail_patterns: default_fail_patterns(),
            warning_prefixes: default_warning_prefixes(),
        }
    }

    pub fn synth_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.synth_timeout_s)
    }

    pub fn sim_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.sim_timeout_s)
    }

    /// Default library first, then alternates in configured order.
    pub fn all_libraries(&self) -> Vec<String> {
        std::iter::once(self.default_library.clone())
            .chain(
                self.alternate_libraries
                    .iter()
                    .filter(|l| **l != self.default_library)
                    .cloned(),
            )
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SyntaxGate {
    Pass,
    Fail { diagnostics: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGate {
    pub verdict: SimVerdict,
    pub transcript: SimTranscript,
}

/// Gate results; a stage is populated only when every earlier stage passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTrace {
    pub syntax: SyntaxGate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimGate>,
}

impl GateTrace {
    pub fn syntax_failure(diagnostics: impl Into<String>) -> Self {
        Self {
            syntax: SyntaxGate::Fail {
                diagnostics: diagnostics.into(),
            },
            top: None,
            synth: None,
            sim: None,
        }
    }

    pub fn passed_all(&self) -> bool {
        self.sim
            .as_ref()
            .is_some_and(|s| s.verdict == SimVerdict::Pass)
    }

    /// Default-library metrics of a design that cleared every gate.
    pub fn passing_metrics(&self) -> Option<&SynthMetrics> {
        if self.passed_all() {
            self.synth.as_ref().and_then(SynthOutcome::metrics)
        } else {
            None
        }
    }

    /// Syntax accepted but synthesis did not complete.
    pub fn genuine_synth_failure(&self) -> Option<&SynthOutcome> {
        match (&self.syntax, &self.synth) {
            (SyntaxGate::Pass, Some(outcome)) if !outcome.is_ok() => Some(outcome),
            _ => None,
        }
    }

    /// Stage monotonicity: sim ⇒ synth ok, synth ⇒ syntax pass.
    pub fn is_monotone(&self) -> bool {
        let synth_ok = self.synth.as_ref().is_some_and(SynthOutcome::is_ok);
        (self.sim.is_none() || synth_ok)
            && (self.synth.is_none() || self.syntax == SyntaxGate::Pass)
    }
}

/// Runs syntax → synthesis → simulation with early exit. Backend trouble is
/// returned as `Err` so it can never be mistaken for a design failure.
pub fn run_gates(
    design: &VerilogSource,
    task: &Task,
    backend: &dyn Backend,
    cfg: &ToolchainConfig,
    label: &str,
) -> Result<GateTrace, InfraError> {
    if design.is_blank() {
        return Ok(GateTrace::syntax_failure("empty design"));
    }
    let syntax = backend.check_syntax(Invocation { label }, design)?;
    if !syntax.ok {
        return Ok(GateTrace::syntax_failure(syntax.diagnostics));
    }
    let top = match frontend::resolve_top_module(design, &task.expected_top) {
        Ok(top) => top,
        Err(e) => return Ok(GateTrace::syntax_failure(format!("structural: {e}"))),
    };
    let synth = backend.synthesize(
        Invocation { label },
        design,
        &top,
        &cfg.default_library,
        cfg.synth_timeout(),
    )?;
    let mut trace = GateTrace {
        syntax: SyntaxGate::Pass,
        top: Some(top),
        synth: Some(synth),
        sim: None,
    };
    if !trace.synth.as_ref().is_some_and(SynthOutcome::is_ok) {
        return Ok(trace);
    }
    let transcript = backend.simulate(Invocation { label }, design, &task.testbench, cfg.sim_timeout())?;
    let pass = task.pass_patterns.as_deref().unwrap_or(&cfg.pass_patterns);
    let fail = task.fail_patterns.as_deref().unwrap_or(&cfg.fail_patterns);
    let verdict = judge_simulation(&transcript, pass, fail);
    trace.sim = Some(SimGate { verdict, transcript });
    Ok(trace)
}

/// One outcome per requested library; failures stay local to their library.
pub fn synthesize_all_libraries(
    design: &VerilogSource,
    top: &str,
    libraries: &[String],
    backend: &dyn Backend,
    timeout: Duration,
    label: &str,
) -> BTreeMap<String, Result<SynthOutcome, InfraError>> {
    libraries
        .iter()
        .map(|lib| {
            let outcome = backend.synthesize(Invocation { label }, design, top, lib, timeout);
            (lib.clone(), outcome)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::test_task;

    fn mock(toml: &str) -> MockBackend {
        MockBackend::from_toml(toml).unwrap()
    }

    const TABLE: &str = r#"
[[entry]]
marker = "bad_syntax"
syntax = { ok = false, diagnostics = "design.v:3: syntax error" }

[[entry]]
marker = "slow_synth"
synth.lib_a = { kind = "timeout" }

[[entry]]
marker = "wrong"
synth.lib_a = { kind = "ok", area = 10.0, delay = 1.0 }
sim = { stdout = "Mismatch at t=10\nALL TESTS PASSED" }

[[entry]]
marker = "good"
synth.lib_a = { kind = "ok", area = 10.0, delay = 1.0, warnings = 2 }
synth.lib_b = { kind = "ok", area = 30.0, delay = 2.5 }
synth.lib_c = { kind = "error", diagnostics = "ERROR: boom" }
sim = { stdout = "ALL TESTS PASSED" }
"#;

    fn design(marker: &str) -> VerilogSource {
        VerilogSource::new(format!("// {marker}\nmodule top_module(); endmodule"), "t")
    }

    fn cfg() -> ToolchainConfig {
        ToolchainConfig::new("lib_a")
    }

    #[test]
    fn syntax_failure_exits_early() {
        let trace = run_gates(&design("bad_syntax"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert!(matches!(trace.syntax, SyntaxGate::Fail { .. }));
        assert!(trace.synth.is_none() && trace.sim.is_none());
        assert!(trace.is_monotone());
    }

    #[test]
    fn synth_timeout_skips_simulation() {
        let trace = run_gates(&design("slow_synth"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert_eq!(trace.syntax, SyntaxGate::Pass);
        assert!(matches!(trace.synth, Some(SynthOutcome::Timeout { .. })));
        assert!(trace.sim.is_none());
        assert!(trace.genuine_synth_failure().is_some());
    }

    #[test]
    fn preceding_failure_signal_fails_simulation() {
        let trace = run_gates(&design("wrong"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert!(!trace.passed_all());
        assert!(trace.passing_metrics().is_none());
    }

    #[test]
    fn all_gates_pass() {
        let trace = run_gates(&design("good"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert!(trace.passed_all());
        assert_eq!(trace.top.as_deref(), Some("top_module"));
        assert_eq!(trace.passing_metrics().unwrap().warnings, 2);
    }

    #[test]
    fn missing_module_is_a_structural_syntax_failure() {
        let d = VerilogSource::new("// good\nassign y = a;", "t");
        let trace = run_gates(&d, &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert!(matches!(trace.syntax, SyntaxGate::Fail { ref diagnostics } if diagnostics.contains("structural")));
    }

    #[test]
    fn empty_design_fails_syntax() {
        let trace = run_gates(&VerilogSource::new("  \n", "t"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap();
        assert_eq!(trace, GateTrace::syntax_failure("empty design"));
    }

    #[test]
    fn unmatched_design_is_infrastructure() {
        let err = run_gates(&design("nothing"), &test_task(), &mock(TABLE), &cfg(), "x").unwrap_err();
        assert_eq!(err.stage, "mock");
    }

    #[test]
    fn multi_library_outcomes_echo_tables() {
        let libs: Vec<String> = ["lib_a", "lib_b", "lib_c"].map(String::from).into();
        let b = mock(TABLE);
        let out = synthesize_all_libraries(&design("good"), "top_module", &libs, &b, Duration::from_secs(30), "x");
        assert_eq!(out.len(), 3);
        assert_eq!(out["lib_b"].as_ref().unwrap().metrics().unwrap().area, 30.0);
        assert!(matches!(out["lib_c"], Ok(SynthOutcome::Error { .. })));
        let again = synthesize_all_libraries(&design("good"), "top_module", &libs, &b, Duration::from_secs(30), "x");
        assert_eq!(out, again);
    }

    #[test]
    fn unknown_library_is_recorded_per_library() {
        let libs: Vec<String> = ["lib_a", "lib_z"].map(String::from).into();
        let out = synthesize_all_libraries(&design("good"), "top_module", &libs, &mock(TABLE), Duration::from_secs(1), "x");
        assert!(out["lib_a"].is_ok());
        assert!(out["lib_z"].is_err());
    }

    #[test]
    fn all_libraries_puts_default_first_without_duplicates() {
        let mut c = cfg();
        c.alternate_libraries = vec!["lib_b".into(), "lib_a".into(), "lib_c".into()];
        assert_eq!(c.all_libraries(), ["lib_a", "lib_b", "lib_c"]);
    }
}
