// SPDX-License-Identifier: Apache-2.0

//! Rule-driven classification of synthesis failures.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{AccessType, Benchmark};
use crate::toolchain::SynthOutcome;

/// Rules shipped with the crate; replaceable at run time.
pub const DEFAULT_RULES: &str = include_str!("../data/taxonomy_rules.toml");

const EVIDENCE_LIMIT: usize = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureSubtype {
    SynthesisTimeout,
    UndefinedModule,
    SimulationOnlySystemTask,
    NonSynthesizableConstruct,
    InvalidNesting,
    CombinationalLoop,
    MultipleDriver,
    LateSyntaxError,
    Unclassified,
}

impl FailureSubtype {
    /// All nine subtypes in precedence order.
    pub const ALL: [FailureSubtype; 9] = [
        FailureSubtype::SynthesisTimeout,
        FailureSubtype::UndefinedModule,
        FailureSubtype::SimulationOnlySystemTask,
        FailureSubtype::NonSynthesizableConstruct,
        FailureSubtype::InvalidNesting,
        FailureSubtype::CombinationalLoop,
        FailureSubtype::MultipleDriver,
        FailureSubtype::LateSyntaxError,
        FailureSubtype::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureSubtype::SynthesisTimeout => "synthesis_timeout",
            FailureSubtype::UndefinedModule => "undefined_module",
            FailureSubtype::SimulationOnlySystemTask => "simulation_only_system_task",
            FailureSubtype::NonSynthesizableConstruct => "non_synthesizable_construct",
            FailureSubtype::InvalidNesting => "invalid_nesting",
            FailureSubtype::CombinationalLoop => "combinational_loop",
            FailureSubtype::MultipleDriver => "multiple_driver",
            FailureSubtype::LateSyntaxError => "late_syntax_error",
            FailureSubtype::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for FailureSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureSubtype {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownSubtype(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureTag {
    pub subtype: FailureSubtype,
    /// Diagnostic line that triggered the rule; empty for timeouts and
    /// unclassified failures.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub evidence: String,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("rule file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("rule {index}: {reason}")]
    BadRule { index: usize, reason: String },
    #[error("unknown subtype `{0}`")]
    UnknownSubtype(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    version: String,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    subtype: FailureSubtype,
    patterns: Vec<String>,
    #[serde(default)]
    note: String,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub subtype: FailureSubtype,
    /// All must match.
    pub patterns: Vec<Regex>,
    pub note: String,
}

impl Rule {
    pub fn new(subtype: FailureSubtype, patterns: &[&str]) -> Result<Self, TaxonomyError> {
        build_rule(
            0,
            RawRule {
                subtype,
                patterns: patterns.iter().map(|s| s.to_string()).collect(),
                note: String::new(),
            },
        )
    }

    /// Evidence line when every pattern matches.
    fn matches(&self, diagnostics: &str) -> Option<String> {
        let mut first = None;
        for re in &self.patterns {
            let m = re.find(diagnostics)?;
            first.get_or_insert(m.start());
        }
        first.map(|at| evidence_line(diagnostics, at))
    }
}

fn evidence_line(text: &str, at: usize) -> String {
    let start = text[..at].rfind('\n').map_or(0, |i| i + 1);
    let end = text[at..].find('\n').map_or(text.len(), |i| at + i);
    let line = text[start..end].trim();
    match line.char_indices().nth(EVIDENCE_LIMIT) {
        Some((cut, _)) => line[..cut].to_string(),
        None => line.to_string(),
    }
}

fn build_rule(index: usize, raw: RawRule) -> Result<Rule, TaxonomyError> {
    let bad = |reason: String| TaxonomyError::BadRule { index, reason };
    if matches!(raw.subtype, FailureSubtype::SynthesisTimeout | FailureSubtype::Unclassified) {
        return Err(bad(format!("`{}` cannot be assigned by a rule", raw.subtype)));
    }
    if raw.patterns.is_empty() {
        return Err(bad("no patterns".into()));
    }
    let patterns = raw
        .patterns
        .iter()
        .map(|p| Regex::new(p).map_err(|e| bad(format!("pattern `{p}`: {e}"))))
        .collect::<Result<_, _>>()?;
    Ok(Rule {
        subtype: raw.subtype,
        patterns,
        note: raw.note,
    })
}

/// Ordered rules; earlier rules take precedence.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self, TaxonomyError> {
        let file: RuleFile = toml::from_str(text)?;
        let rules = file
            .rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| build_rule(i, r))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            version: file.version,
            rules,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("bundled rule file is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Lowest precedence position.
    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }
}

/// Single precedence-ordered tag for a synthesis failure; `None` when the
/// outcome is a success.
pub fn classify_failure(outcome: &SynthOutcome, rules: &RuleSet) -> Option<FailureTag> {
    match outcome {
        SynthOutcome::Ok { .. } => None,
        SynthOutcome::Timeout { .. } => Some(FailureTag {
            subtype: FailureSubtype::SynthesisTimeout,
            evidence: String::new(),
        }),
        SynthOutcome::Error { diagnostics } => Some(
            rules
                .rules
                .iter()
                .find_map(|r| {
                    r.matches(diagnostics).map(|evidence| FailureTag {
                        subtype: r.subtype,
                        evidence,
                    })
                })
                .unwrap_or(FailureTag {
                    subtype: FailureSubtype::Unclassified,
                    evidence: String::new(),
                }),
        ),
    }
}

/// Every subtype with at least one matching rule, in precedence order.
/// Diagnostic aid only; counts use [`classify_failure`].
pub fn classify_all(outcome: &SynthOutcome, rules: &RuleSet) -> Vec<FailureTag> {
    let diagnostics = match outcome {
        SynthOutcome::Ok { .. } => return Vec::new(),
        SynthOutcome::Timeout { .. } => return classify_failure(outcome, rules).into_iter().collect(),
        SynthOutcome::Error { diagnostics } => diagnostics,
    };
    let mut found: BTreeMap<FailureSubtype, String> = BTreeMap::new();
    for r in &rules.rules {
        if found.contains_key(&r.subtype) {
            continue;
        }
        if let Some(evidence) = r.matches(diagnostics) {
            found.insert(r.subtype, evidence);
        }
    }
    if found.is_empty() {
        found.insert(FailureSubtype::Unclassified, String::new());
    }
    found
        .into_iter()
        .map(|(subtype, evidence)| FailureTag { subtype, evidence })
        .collect()
}

/// A tag with the attempt it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedFailure {
    pub model: String,
    pub task: String,
    pub attempt: u32,
    pub benchmark: Benchmark,
    pub access_type: AccessType,
    pub tag: FailureTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Model,
    Benchmark,
    AccessType,
    Subtype,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(GroupBy::Model),
            "benchmark" => Ok(GroupBy::Benchmark),
            "access_type" | "access-type" => Ok(GroupBy::AccessType),
            "subtype" => Ok(GroupBy::Subtype),
            other => Err(format!("unknown grouping `{other}` (model, benchmark, access_type, subtype)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub group: String,
    pub subtype: FailureSubtype,
    pub count: usize,
    /// Share within the group, percent.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub group_by: GroupBy,
    pub total: usize,
    pub group_totals: BTreeMap<String, usize>,
    /// Ordered by group, then subtype precedence; zero counts omitted.
    pub rows: Vec<BreakdownRow>,
}

/// Counts and within-group percentages. Grouping by subtype puts every tag in
/// its own subtype's group, with percentages relative to the whole set.
pub fn taxonomy_breakdown(tags: &[TaggedFailure], group_by: GroupBy) -> Breakdown {
    let mut counts: BTreeMap<String, BTreeMap<FailureSubtype, usize>> = BTreeMap::new();
    for t in tags {
        let group = match group_by {
            GroupBy::Model => t.model.clone(),
            GroupBy::Benchmark => t.benchmark.to_string(),
            GroupBy::AccessType => t.access_type.to_string(),
            GroupBy::Subtype => t.tag.subtype.to_string(),
        };
        *counts.entry(group).or_default().entry(t.tag.subtype).or_default() += 1;
    }
    let group_totals: BTreeMap<String, usize> =
        counts.iter().map(|(g, c)| (g.clone(), c.values().sum())).collect();
    let total = tags.len();
    let mut rows = Vec::new();
    for (group, by_subtype) in &counts {
        let denom = if group_by == GroupBy::Subtype { total } else { group_totals[group] };
        for (&subtype, &count) in by_subtype {
            rows.push(BreakdownRow {
                group: group.clone(),
                subtype,
                count,
                pct: 100.0 * count as f64 / denom as f64,
            });
        }
    }
    if group_by == GroupBy::Subtype {
        rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.subtype.cmp(&b.subtype)));
    }
    Breakdown {
        group_by,
        total,
        group_totals,
        rows,
    }
}
