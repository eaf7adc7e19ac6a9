// SPDX-License-Identifier: Apache-2.0

//! Task manifest: a versioned TOML table of tasks whose file references are
//! relative to the manifest itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CampaignError;
use crate::frontend::{self, count_dependency_edges, normalize_complexity, VerilogSource};
use crate::task::{Benchmark, Task, TaskPaths};

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    schema: u32,
    #[serde(rename = "task", default)]
    tasks: Vec<TaskEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    id: String,
    benchmark: Benchmark,
    category: String,
    prompt: PathBuf,
    testbench: PathBuf,
    #[serde(default)]
    golden: Option<PathBuf>,
    expected_top: String,
    /// Replaces the edge count derived from the golden design; required
    /// when no golden is given.
    #[serde(default)]
    dep_edges: Option<u64>,
    #[serde(default)]
    pass_patterns: Option<Vec<String>>,
    #[serde(default)]
    fail_patterns: Option<Vec<String>>,
}

/// Ids become journal keys and directory names.
pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+' | ':' | '@'))
        && id != "."
        && id != ".."
}

fn read(path: &Path) -> Result<String, CampaignError> {
    fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))
}

/// Loads and validates the manifest; complexity weights are normalized over
/// the tasks it lists.
pub fn load_manifest(path: &Path) -> Result<Vec<Task>, CampaignError> {
    let text = read(path)?;
    let file: ManifestFile = toml::from_str(&text).map_err(|e| CampaignError::config(path, e))?;
    if file.schema != MANIFEST_SCHEMA {
        return Err(CampaignError::config(
            path,
            format!("unsupported manifest schema {} (expected {MANIFEST_SCHEMA})", file.schema),
        ));
    }
    if file.tasks.is_empty() {
        return Err(CampaignError::config(path, "manifest lists no tasks"));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = BTreeSet::new();
    let mut staged = Vec::new();
    let mut edges = BTreeMap::new();
    for e in file.tasks {
        let bad = |msg: String| CampaignError::config(path, format!("task `{}`: {msg}", e.id));
        if !valid_id(&e.id) {
            return Err(bad("invalid task id".into()));
        }
        if !seen.insert(e.id.clone()) {
            return Err(bad("duplicate id".into()));
        }
        if !frontend::is_identifier(&e.expected_top) {
            return Err(bad(format!("expected_top `{}` is not a Verilog identifier", e.expected_top)));
        }
        for list in [&e.pass_patterns, &e.fail_patterns].into_iter().flatten() {
            if list.is_empty() || list.iter().any(String::is_empty) {
                return Err(bad("pattern lists must be non-empty".into()));
            }
        }
        let paths = TaskPaths {
            prompt: base.join(&e.prompt),
            testbench: base.join(&e.testbench),
            golden: e.golden.as_ref().map(|g| base.join(g)),
        };
        let prompt = read(&paths.prompt)?;
        let testbench = read(&paths.testbench)?;
        let golden = match &paths.golden {
            Some(g) => Some(VerilogSource::new(read(g)?, "golden")),
            None => None,
        };
        let count = match (e.dep_edges, &golden) {
            (Some(n), _) => n,
            (None, Some(g)) => count_dependency_edges(g).map_err(|err| bad(format!("golden design: {err}")))?,
            (None, None) => return Err(bad("no golden design; `dep_edges` is required".into())),
        };
        edges.insert(e.id.clone(), count);
        staged.push((e, prompt, testbench, golden, paths));
    }
    let weights = normalize_complexity(&edges).map_err(|e| CampaignError::config(path, e))?;
    Ok(staged
        .into_iter()
        .map(|(e, prompt, testbench, golden, paths)| Task {
            complexity: weights[&e.id],
            id: e.id,
            benchmark: e.benchmark,
            category: e.category,
            prompt,
            testbench,
            golden,
            expected_top: e.expected_top,
            pass_patterns: e.pass_patterns,
            fail_patterns: e.fail_patterns,
            paths,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn fixture(manifest: &str) -> (tempfile::TempDir, Result<Vec<Task>, CampaignError>) {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "p.txt", "Build it.");
        write(dir.path(), "tb.v", "module tb; endmodule");
        write(dir.path(), "g1.v", "module top_module(input a, output y); assign y = a; endmodule");
        write(dir.path(), "g2.v", "module top_module(input a, b, output y); assign y = a & b; endmodule");
        write(dir.path(), "m.toml", manifest);
        let r = load_manifest(&dir.path().join("m.toml"));
        (dir, r)
    }

    const TWO: &str = r#"
schema = 1
[[task]]
id = "t1"
benchmark = "verilogeval"
category = "combinational"
prompt = "p.txt"
testbench = "tb.v"
golden = "g1.v"
expected_top = "top_module"

[[task]]
id = "t2"
benchmark = "rtllm"
category = "arithmetic"
prompt = "p.txt"
testbench = "tb.v"
golden = "g2.v"
expected_top = "top_module"
pass_patterns = ["OK"]

[[task]]
id = "t3"
benchmark = "rtllm"
category = "arithmetic"
prompt = "p.txt"
testbench = "tb.v"
expected_top = "top_module"
dep_edges = 3
"#;

    #[test]
    fn loads_and_weights() {
        let (_d, r) = fixture(TWO);
        let tasks = r.unwrap();
        assert_eq!(tasks.len(), 3);
        assert_eq!(tasks[0].complexity.raw_edges, 1);
        assert_eq!(tasks[0].complexity.weight, 1.0);
        assert_eq!(tasks[2].complexity.weight, 24.0);
        assert_eq!(tasks[1].complexity.weight, 12.5);
        assert!(tasks[2].golden.is_none());
        assert_eq!(tasks[1].pass_patterns.as_deref(), Some(&["OK".to_string()][..]));
    }

    #[test]
    fn missing_file_is_reported() {
        let (_d, r) = fixture(&TWO.replace("g2.v", "nope.v"));
        assert!(matches!(r, Err(CampaignError::Io { .. })));
    }

    #[test]
    fn bad_top_rejected() {
        let (_d, r) = fixture(&TWO.replacen("expected_top = \"top_module\"", "expected_top = \"9bad\"", 1));
        assert!(r.unwrap_err().to_string().contains("not a Verilog identifier"));
    }

    #[test]
    fn goldenless_task_needs_edges() {
        let (_d, r) = fixture(&TWO.replace("dep_edges = 3\n", ""));
        assert!(r.unwrap_err().to_string().contains("dep_edges"));
    }

    #[test]
    fn ids_are_path_safe() {
        assert!(valid_id("Prob001_zero"));
        assert!(!valid_id("a/b"));
        assert!(!valid_id(".."));
        assert!(!valid_id(""));
    }
}
