// SPDX-License-Identifier: Apache-2.0

//! Benchmark problems as loaded from a manifest.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::frontend::{ComplexityWeight, VerilogSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Verilogeval,
    Rtllm,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::Verilogeval => "verilogeval",
            Benchmark::Rtllm => "rtllm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessType {
    Proprietary,
    OpenWeight,
}

impl fmt::Display for AccessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessType::Proprietary => "proprietary",
            AccessType::OpenWeight => "open_weight",
        })
    }
}

/// Where a task's inputs came from, kept for diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPaths {
    pub prompt: PathBuf,
    pub testbench: PathBuf,
    pub golden: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub benchmark: Benchmark,
    pub category: String,
    pub prompt: String,
    pub testbench: String,
    /// Absent goldens leave the task contributing to coverage only.
    pub golden: Option<VerilogSource>,
    pub expected_top: String,
    pub complexity: ComplexityWeight,
    /// Per-task overrides of the simulation judge patterns.
    pub pass_patterns: Option<Vec<String>>,
    pub fail_patterns: Option<Vec<String>>,
    pub paths: TaskPaths,
}

#[cfg(test)]
pub(crate) fn test_task() -> Task {
    Task {
        id: "t1".into(),
        benchmark: Benchmark::Verilogeval,
        category: "combinational".into(),
        prompt: "Implement top_module.".into(),
        testbench: "module tb; endmodule".into(),
        golden: None,
        expected_top: "top_module".into(),
        complexity: ComplexityWeight {
            raw_edges: 1,
            weight: 1.0,
        },
        pass_patterns: None,
        fail_patterns: None,
        paths: TaskPaths::default(),
    }
}
