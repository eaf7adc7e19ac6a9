// SPDX-License-Identifier: Apache-2.0

//! Backend that shells out to real tools (a syntax checker, a synthesizer and
//! a simulator). Command lines and the synthesis script are templates from the
//! config file; metric extraction uses anchored patterns from the same file.
//!
//! Placeholders: `{design}`, `{testbench}`, `{top}`, `{liberty}`, `{script}`,
//! `{scratch}`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{Backend, InfraError, Invocation, SimTranscript, SynthMetrics, SynthOutcome, SyntaxOutcome};
use crate::frontend::VerilogSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalToolsConfig {
    pub syntax: Vec<String>,
    pub synth: Vec<String>,
    pub synth_script: String,
    pub sim_compile: Vec<String>,
    pub sim_run: Vec<String>,
    /// One capture group; the last match in the synthesis log is used.
    pub area_pattern: String,
    pub delay_pattern: String,
    /// Multiplier taking the captured delay to ns (0.001 for ps reports).
    #[serde(default = "unit")]
    pub delay_scale: f64,
    /// Library id → liberty file.
    pub libraries: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub scratch_root: Option<PathBuf>,
    #[serde(default)]
    pub warning_prefixes: Option<Vec<String>>,
}

fn unit() -> f64 {
    1.0
}

/// Exact command line and exit status of one tool run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub label: String,
    pub stage: String,
    pub argv: Vec<String>,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub elapsed_s: f64,
}

pub struct ExternalTools {
    cfg: ExternalToolsConfig,
    area_re: Regex,
    delay_re: Regex,
    warning_prefixes: Vec<String>,
    scratch_root: PathBuf,
    keep_artifacts: bool,
    audit: Mutex<Vec<AuditEntry>>,
}

struct RunResult {
    output: String,
    success: bool,
    timed_out: bool,
    elapsed: Duration,
}

impl ExternalTools {
    pub fn new(cfg: ExternalToolsConfig, keep_artifacts: bool) -> Result<Self, InfraError> {
        let compile = |what: &str, p: &str| {
            Regex::new(p).map_err(|e| InfraError::new("config", format!("bad {what} pattern: {e}")))
        };
        let area_re = compile("area", &cfg.area_pattern)?;
        let delay_re = compile("delay", &cfg.delay_pattern)?;
        let scratch_root = cfg
            .scratch_root
            .clone()
            .unwrap_or_else(|| std::env::temp_dir().join(format!("rtleval-{}", std::process::id())));
        fs::create_dir_all(&scratch_root)
            .map_err(|e| InfraError::new("scratch", format!("{}: {e}", scratch_root.display())))?;
        let warning_prefixes = cfg
            .warning_prefixes
            .clone()
            .unwrap_or_else(|| vec!["Warning".to_string()]);
        Ok(Self {
            cfg,
            area_re,
            delay_re,
            warning_prefixes,
            scratch_root,
            keep_artifacts,
            audit: Mutex::new(Vec::new()),
        })
    }

    pub fn audit_entries(&self) -> Vec<AuditEntry> {
        self.audit.lock().expect("audit lock").clone()
    }

    fn scratch(&self, label: &str, stage: &str) -> Result<PathBuf, InfraError> {
        let safe: String = label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect();
        let dir = self.scratch_root.join(safe).join(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err("scratch", &dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| io_err("scratch", &dir, e))?;
        Ok(dir)
    }

    fn finish(&self, dir: &Path, failed: bool) {
        if !(self.keep_artifacts && failed) {
            let _ = fs::remove_dir_all(dir);
        }
    }

    fn run(
        &self,
        label: &str,
        stage: &str,
        template: &[String],
        vars: &[(&str, String)],
        dir: &Path,
        timeout: Duration,
    ) -> Result<RunResult, InfraError> {
        let argv: Vec<String> = template.iter().map(|a| substitute(a, vars)).collect();
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| InfraError::new(stage, "empty command template"))?;
        let log_path = dir.join(format!("{stage}.log"));
        let log = File::create(&log_path).map_err(|e| io_err(stage, &log_path, e))?;
        let log_err = log.try_clone().map_err(|e| io_err(stage, &log_path, e))?;
        let start = Instant::now();
        let mut child = Command::new(program)
            .args(args)
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log_err)
            .spawn()
            .map_err(|e| InfraError::new(stage, format!("cannot spawn `{program}`: {e}")))?;
        // wait_timeout can wake marginally early; keep waiting out the budget
        let status = loop {
            let left = timeout.saturating_sub(start.elapsed());
            let s = child
                .wait_timeout(left)
                .map_err(|e| InfraError::new(stage, format!("wait failed: {e}")))?;
            if s.is_some() || start.elapsed() >= timeout {
                break s;
            }
        };
        let (success, code, timed_out) = match status {
            Some(s) => (s.success(), s.code(), false),
            None => {
                let _ = child.kill();
                let _ = child.wait();
                (false, None, true)
            }
        };
        let elapsed = start.elapsed();
        let output = String::from_utf8_lossy(&fs::read(&log_path).map_err(|e| io_err(stage, &log_path, e))?)
            .into_owned();
        let entry = AuditEntry {
            label: label.to_string(),
            stage: stage.to_string(),
            argv,
            exit_code: code,
            timed_out,
            elapsed_s: elapsed.as_secs_f64(),
        };
        log::debug!("{} {} exit={:?} timed_out={}", entry.label, entry.stage, code, timed_out);
        self.record(entry);
        Ok(RunResult {
            output,
            success,
            timed_out,
            elapsed,
        })
    }

    fn record(&self, entry: AuditEntry) {
        let path = self.scratch_root.join("audit.jsonl");
        let mut audit = self.audit.lock().expect("audit lock");
        if let Ok(mut f) = fs::OpenOptions::new().create(true).append(true).open(&path) {
            if let Ok(line) = serde_json::to_string(&entry) {
                let _ = writeln!(f, "{line}");
            }
        }
        audit.push(entry);
    }

    fn parse_last(re: &Regex, text: &str) -> Option<f64> {
        re.captures_iter(text)
            .last()
            .and_then(|c| c.get(1))
            .and_then(|m| m.as_str().parse().ok())
    }

    fn count_warnings(&self, log: &str) -> u64 {
        log.lines()
            .filter(|l| {
                let l = l.trim_start();
                self.warning_prefixes.iter().any(|p| l.starts_with(p.as_str()))
            })
            .count() as u64
    }
}

fn substitute(template: &str, vars: &[(&str, String)]) -> String {
    vars.iter()
        .fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

fn io_err(stage: &str, path: &Path, e: std::io::Error) -> InfraError {
    InfraError::new(stage, format!("{}: {e}", path.display()))
}

fn write_file(stage: &str, path: &Path, text: &str) -> Result<(), InfraError> {
    fs::write(path, text).map_err(|e| io_err(stage, path, e))
}

impl Backend for ExternalTools {
    fn check_syntax(&self, ctx: Invocation<'_>, design: &VerilogSource) -> Result<SyntaxOutcome, InfraError> {
        let dir = self.scratch(ctx.label, "syntax")?;
        let design_path = dir.join("design.v");
        write_file("syntax", &design_path, &design.text)?;
        let vars = [
            ("design", design_path.display().to_string()),
            ("scratch", dir.display().to_string()),
        ];
        // the syntax checker shares the synthesis budget
        let r = self.run(ctx.label, "syntax", &self.cfg.syntax, &vars, &dir, Duration::from_secs(30))?;
        let ok = r.success && !r.timed_out;
        self.finish(&dir, !ok);
        Ok(SyntaxOutcome {
            ok,
            diagnostics: r.output,
        })
    }

    fn synthesize(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        top: &str,
        library: &str,
        timeout: Duration,
    ) -> Result<SynthOutcome, InfraError> {
        let liberty = self
            .cfg
            .libraries
            .get(library)
            .ok_or_else(|| InfraError::new("synth", format!("library `{library}` is not configured")))?;
        let dir = self.scratch(ctx.label, &format!("synth-{library}"))?;
        let design_path = dir.join("design.v");
        write_file("synth", &design_path, &design.text)?;
        let script_path = dir.join("synth.ys");
        let mut vars = vec![
            ("design", design_path.display().to_string()),
            ("top", top.to_string()),
            ("liberty", liberty.display().to_string()),
            ("scratch", dir.display().to_string()),
        ];
        write_file("synth", &script_path, &substitute(&self.cfg.synth_script, &vars))?;
        vars.push(("script", script_path.display().to_string()));
        let r = self.run(ctx.label, "synth", &self.cfg.synth, &vars, &dir, timeout)?;
        if r.timed_out {
            self.finish(&dir, true);
            return Ok(SynthOutcome::Timeout {
                elapsed_s: r.elapsed.as_secs_f64(),
            });
        }
        if !r.success {
            self.finish(&dir, true);
            return Ok(SynthOutcome::Error { diagnostics: r.output });
        }
        let area = Self::parse_last(&self.area_re, &r.output);
        let delay = Self::parse_last(&self.delay_re, &r.output);
        let (Some(area), Some(delay)) = (area, delay) else {
            self.finish(&dir, true);
            return Err(InfraError::new(
                "synth",
                "synthesis succeeded but area/delay could not be extracted from the report",
            ));
        };
        self.finish(&dir, false);
        Ok(SynthOutcome::Ok {
            metrics: SynthMetrics {
                area,
                delay: delay * self.cfg.delay_scale,
                warnings: self.count_warnings(&r.output),
                library_id: library.to_string(),
            },
        })
    }

    fn simulate(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        testbench: &str,
        timeout: Duration,
    ) -> Result<SimTranscript, InfraError> {
        let dir = self.scratch(ctx.label, "sim")?;
        let design_path = dir.join("design.v");
        let tb_path = dir.join("testbench.v");
        write_file("sim", &design_path, &design.text)?;
        write_file("sim", &tb_path, testbench)?;
        let vars = [
            ("design", design_path.display().to_string()),
            ("testbench", tb_path.display().to_string()),
            ("scratch", dir.display().to_string()),
        ];
        let start = Instant::now();
        let compiled = self.run(ctx.label, "sim-compile", &self.cfg.sim_compile, &vars, &dir, timeout)?;
        if !compiled.success {
            self.finish(&dir, true);
            return Ok(SimTranscript {
                stdout: compiled.output,
                exit_ok: false,
                timed_out: compiled.timed_out,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
        let remaining = timeout.saturating_sub(start.elapsed());
        let ran = self.run(ctx.label, "sim-run", &self.cfg.sim_run, &vars, &dir, remaining)?;
        let ok = ran.success && !ran.timed_out;
        self.finish(&dir, !ok);
        Ok(SimTranscript {
            stdout: ran.output,
            exit_ok: ran.success,
            timed_out: ran.timed_out,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    fn tools(root: &Path, synth: &str, keep: bool) -> ExternalTools {
        let cfg = ExternalToolsConfig {
            syntax: sh("grep -q endmodule {design}"),
            synth: sh(synth),
            synth_script: "read {design}; hierarchy -top {top}; lib {liberty}\n".into(),
            sim_compile: sh("cat {design} {testbench} > {scratch}/all.v"),
            sim_run: sh("grep -o 'ALL TESTS PASSED' all.v | head -n1"),
            area_pattern: r"(?m)^\s*Chip area for .*: ([0-9.eE+-]+)".into(),
            delay_pattern: r"(?m)Delay = ([0-9.]+) ps".into(),
            delay_scale: 0.001,
            libraries: [("lib".to_string(), PathBuf::from("/libs/fake.lib"))].into(),
            scratch_root: Some(root.to_path_buf()),
            warning_prefixes: None,
        };
        ExternalTools::new(cfg, keep).unwrap()
    }

    const REPORT: &str = "cat {script}; echo 'Warning: a'; echo '  Warning: b'; echo 'Chip area for module top: 3.0'; \
                          echo 'Chip area for module top: 12.5'; echo 'Delay = 340 ps'";

    fn design() -> VerilogSource {
        VerilogSource::new("module top; endmodule", "t")
    }

    #[test]
    fn extracts_metrics_from_report() {
        let root = tempfile::tempdir().unwrap();
        let t = tools(root.path(), REPORT, false);
        let ctx = Invocation { label: "m/t/1" };
        let out = t.synthesize(ctx, &design(), "top", "lib", Duration::from_secs(10)).unwrap();
        let m = out.metrics().expect("ok");
        assert_eq!(m.area, 12.5);
        assert!((m.delay - 0.34).abs() < 1e-12);
        assert_eq!(m.warnings, 2);
        let audit = t.audit_entries();
        assert_eq!(audit.len(), 1);
        assert_eq!(audit[0].exit_code, Some(0));
        assert!(audit[0].argv[2].contains("synth.ys"));
        assert!(root.path().join("audit.jsonl").exists());
    }

    #[test]
    fn nonzero_exit_keeps_diagnostics() {
        let root = tempfile::tempdir().unwrap();
        let t = tools(root.path(), "echo 'ERROR: Module `\\\\foo'\"'\"' referenced'; exit 1", true);
        let out = t
            .synthesize(Invocation { label: "a" }, &design(), "top", "lib", Duration::from_secs(10))
            .unwrap();
        assert!(matches!(out, SynthOutcome::Error { ref diagnostics } if diagnostics.contains("ERROR: Module")));
        // keep-artifacts retains the failing scratch directory
        assert!(root.path().join("a").join("synth-lib").join("synth.ys").exists());
    }

    #[test]
    fn timeout_is_enforced() {
        let root = tempfile::tempdir().unwrap();
        let t = tools(root.path(), "sleep 5", false);
        let budget = Duration::from_millis(200);
        let out = t.synthesize(Invocation { label: "a" }, &design(), "top", "lib", budget).unwrap();
        match out {
            SynthOutcome::Timeout { elapsed_s } => assert!((budget.as_secs_f64()..4.0).contains(&elapsed_s), "{elapsed_s}"),
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn missing_executable_is_infrastructure() {
        let root = tempfile::tempdir().unwrap();
        let mut t = tools(root.path(), REPORT, false);
        t.cfg.synth = vec!["/nonexistent/yosys-xyz".into()];
        let err = t
            .synthesize(Invocation { label: "a" }, &design(), "top", "lib", Duration::from_secs(1))
            .unwrap_err();
        assert_eq!(err.stage, "synth");
    }

    #[test]
    fn unparseable_report_is_infrastructure() {
        let root = tempfile::tempdir().unwrap();
        let t = tools(root.path(), "echo done", false);
        assert!(t
            .synthesize(Invocation { label: "a" }, &design(), "top", "lib", Duration::from_secs(5))
            .is_err());
    }

    #[test]
    fn syntax_and_simulation_round_trip() {
        let root = tempfile::tempdir().unwrap();
        let t = tools(root.path(), REPORT, false);
        let ctx = Invocation { label: "a" };
        assert!(t.check_syntax(ctx, &design()).unwrap().ok);
        assert!(!t.check_syntax(ctx, &VerilogSource::new("module top;", "t")).unwrap().ok);
        let tr = t
            .simulate(ctx, &design(), "initial $display(\"ALL TESTS PASSED\");", Duration::from_secs(5))
            .unwrap();
        assert!(tr.exit_ok);
        assert_eq!(tr.stdout.trim(), "ALL TESTS PASSED");
        // scratch removed on success
        assert!(!root.path().join("a").join("sim").exists());
    }
}
