// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A private copy of a bundled fixture so generated files stay out of the
/// source tree.
pub fn fixture_copy(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join(name), dir.path());
    dir
}

pub fn demo() -> tempfile::TempDir {
    fixture_copy("demo")
}

/// Runs the binary in `dir` with `--config harness.toml` and extra flags.
pub fn rtleval_with(dir: &Path, flags: &[&str], args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtleval"))
        .current_dir(dir)
        .args(["--config", "harness.toml"])
        .args(flags)
        .args(args)
        .output()
        .unwrap()
}

/// As [`rtleval_with`], on the mock backend.
pub fn rtleval(dir: &Path, args: &[&str]) -> Output {
    rtleval_with(dir, &["--mock"], args)
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let o = rtleval(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    stdout(&o)
}
