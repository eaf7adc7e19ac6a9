// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::SimTranscript;

pub const DEFAULT_PASS_PATTERNS: &[&str] = &["ALL TESTS PASSED", "Test passed", "PASS"];
pub const DEFAULT_FAIL_PATTERNS: &[&str] = &["FAIL", "Mismatch", "Error", "assertion failed"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SimVerdict {
    Pass,
    Fail { reason: String },
}

/// Fail-first verdict over a simulation transcript.
///
/// A pass needs a clean exit, at least one pass pattern, and no fail pattern
/// anywhere in the output (before or after the pass string). Patterns are
/// case-sensitive literals.
pub fn judge_simulation<S: AsRef<str>>(
    transcript: &SimTranscript,
    pass_patterns: &[S],
    fail_patterns: &[S],
) -> SimVerdict {
    let fail = |reason: String| SimVerdict::Fail { reason };
    if transcript.timed_out {
        return fail("simulation timed out".into());
    }
    if !transcript.exit_ok {
        return fail("simulator exited with failure status".into());
    }
    let out = &transcript.stdout;
    let first_pass = pass_patterns
        .iter()
        .filter_map(|p| out.find(p.as_ref()).map(|at| (at, p.as_ref())))
        .min_by_key(|(at, _)| *at);
    let first_fail = fail_patterns
        .iter()
        .filter_map(|p| out.find(p.as_ref()).map(|at| (at, p.as_ref())))
        .min_by_key(|(at, _)| *at);
    match (first_pass, first_fail) {
        (_, Some((at, pat))) => match first_pass {
            Some((pass_at, _)) if pass_at < at => {
                fail(format!("fail signal `{pat}` at offset {at} after pass string"))
            }
            _ => fail(format!("fail signal `{pat}` at offset {at}")),
        },
        (None, None) => fail("no pass string in output".into()),
        (Some(_), None) => SimVerdict::Pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(stdout: &str) -> SimTranscript {
        SimTranscript {
            stdout: stdout.into(),
            exit_ok: true,
            timed_out: false,
            wall_time_s: 0.1,
        }
    }

    fn judge(tr: &SimTranscript) -> SimVerdict {
        judge_simulation(tr, DEFAULT_PASS_PATTERNS, DEFAULT_FAIL_PATTERNS)
    }

    #[test]
    fn clean_pass() {
        assert_eq!(judge(&t("ALL TESTS PASSED")), SimVerdict::Pass);
    }

    #[test]
    fn preceding_failure_wins() {
        assert!(matches!(judge(&t("Mismatch at t=10\nALL TESTS PASSED")), SimVerdict::Fail { .. }));
    }

    #[test]
    fn trailing_failure_also_fails() {
        assert!(matches!(judge(&t("ALL TESTS PASSED\nMismatch at t=99")), SimVerdict::Fail { .. }));
    }

    #[test]
    fn bad_exit_overrides_text() {
        let mut tr = t("ALL TESTS PASSED");
        tr.exit_ok = false;
        assert!(matches!(judge(&tr), SimVerdict::Fail { .. }));
    }

    #[test]
    fn patterns_are_case_sensitive() {
        assert!(matches!(judge(&t("all tests passed")), SimVerdict::Fail { .. }));
    }
}
