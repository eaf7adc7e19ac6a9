// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of the `rtleval` binary on the bundled demo campaign.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{code, demo, ok, rtleval, stderr};

#[test]
fn usage_errors_exit_1() {
    let d = demo();
    assert_eq!(code(&rtleval(d.path(), &["frobnicate"])), 1);
    assert_eq!(code(&rtleval(d.path(), &["report", "failures", "--group-by", "planet"])), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_rtleval"))
        .current_dir(d.path())
        .args(["--config", "missing.toml", "score"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert_eq!(code(&rtleval(d.path(), &["--help"])), 0);
}

#[test]
fn run_without_golden_cache_points_to_golden() {
    let d = demo();
    let o = rtleval(d.path(), &["run"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rtleval golden"), "{}", stderr(&o));
}

#[test]
fn leaderboard_requires_score() {
    let d = demo();
    ok(d.path(), &["golden"]);
    ok(d.path(), &["run"]);
    let o = rtleval(d.path(), &["report", "leaderboard"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rtleval score"));
    ok(d.path(), &["score"]);
    let board = ok(d.path(), &["report", "leaderboard"]);
    assert!(board.starts_with("model"));
    assert_eq!(board.lines().count(), 4);
}

#[test]
fn partial_journal_exits_2() {
    let d = demo();
    ok(d.path(), &["golden"]);
    ok(d.path(), &["run", "--stop-after", "20"]);
    let o = rtleval(d.path(), &["score"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("incomplete journal"));
    assert_eq!(code(&rtleval(d.path(), &["sensitivity"])), 2);
}

#[test]
fn infrastructure_failure_exits_3_until_resolved() {
    let d = demo();
    ok(d.path(), &["golden"]);
    let victim = d.path().join("pregen/beta/rt_alu/attempt_2.v");
    let saved = fs::read(&victim).unwrap();
    fs::remove_file(&victim).unwrap();
    let o = rtleval(d.path(), &["run"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(code(&rtleval(d.path(), &["score"])), 3);
    assert_eq!(code(&rtleval(d.path(), &["xlib"])), 3);

    fs::write(&victim, saved).unwrap();
    ok(d.path(), &["run"]);
    ok(d.path(), &["score"]);
}

#[test]
fn empty_journal_scores_to_empty_table_with_warning() {
    let d = demo();
    ok(d.path(), &["golden"]);
    let o = rtleval(d.path(), &["score"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
    let board = ok(d.path(), &["report", "leaderboard", "--csv"]);
    assert_eq!(board, "model,coverage,global_hqi,expected_hqi,gap,pass_rate,tier\n");

    // the table is bound to the journal it came from
    ok(d.path(), &["run"]);
    let o = rtleval(d.path(), &["report", "leaderboard"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("stale"));
}

#[test]
fn classify_writes_tags_and_failure_csv_has_one_row_per_group() {
    let d = demo();
    ok(d.path(), &["golden"]);
    ok(d.path(), &["run"]);
    let summary = ok(d.path(), &["classify"]);
    assert!(summary.contains("late_syntax_error"));
    assert!(d.path().join("journal.tags.json").exists());
    for (group, groups) in [("model", 3), ("benchmark", 2), ("access_type", 2)] {
        let csv = ok(d.path(), &["report", "failures", "--group-by", group, "--csv"]);
        assert_eq!(csv.lines().count(), groups + 1, "{csv}");
    }
}

#[test]
fn heatmap_files_share_model_order() {
    let d = demo();
    ok(d.path(), &["golden"]);
    ok(d.path(), &["run"]);
    ok(d.path(), &["score"]);
    ok(d.path(), &["report", "heatmap", "--out-dir", "out"]);
    let best = fs::read_to_string(d.path().join("out/heatmap_best_of_k.csv")).unwrap();
    let mean = fs::read_to_string(d.path().join("out/heatmap_per_attempt.csv")).unwrap();
    assert_eq!(best.lines().next(), mean.lines().next());
    assert_eq!(best.lines().next(), Some("category,alpha,beta,gamma"));
}

/// Runs the whole pipeline and returns every report it can render.
fn all_reports(dir: &Path, workers: &str) -> Vec<(String, String)> {
    ok(dir, &["--workers", workers, "golden"]);
    ok(dir, &["--workers", workers, "run"]);
    ok(dir, &["score"]);
    ok(dir, &["classify"]);
    let mut out = Vec::new();
    for args in [
        &["report", "leaderboard"][..],
        &["report", "leaderboard", "--csv"],
        &["report", "heatmap"],
        &["report", "failures", "--group-by", "model"],
        &["report", "failures", "--group-by", "access_type", "--csv"],
        &["report", "inference", "--csv"],
        &["sensitivity"],
        &["xlib", "--csv"],
    ] {
        out.push((args.join(" "), ok(dir, args)));
    }
    out.push(("golden.json".into(), fs::read_to_string(dir.join("golden.json")).unwrap()));
    out.push(("scores".into(), fs::read_to_string(dir.join("journal.scores.json")).unwrap()));
    out
}

#[test]
fn reports_are_byte_identical_across_worker_counts() {
    let (a, b) = (demo(), demo());
    let ra = all_reports(a.path(), "1");
    let rb = all_reports(b.path(), "8");
    for ((name, x), (_, y)) in ra.iter().zip(&rb) {
        assert_eq!(x, y, "{name} differs");
    }
}
