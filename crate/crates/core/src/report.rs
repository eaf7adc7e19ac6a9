// SPDX-License-Identifier: Apache-2.0

//! Text and CSV renderings of scored campaigns. HQI-scale values use one
//! decimal place throughout.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::campaign::{InferenceSummary, ScoreTable, TierThresholds};
use crate::robustness::XlibRow;
use crate::scoring::SensitivityReport;
use crate::taxonomy::{Breakdown, FailureSubtype, GroupBy, TaggedFailure};

pub fn assign_tier(global_hqi: f64, t: &TierThresholds) -> u8 {
    if global_hqi >= t.tier1_min {
        1
    } else if global_hqi < t.tier3_below {
        3
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub coverage: f64,
    pub global_hqi: f64,
    pub expected_hqi: f64,
    pub gap: f64,
    pub pass_rate: f64,
    pub tier: u8,
}

/// Rows by Global HQI, best first; ties broken by model id.
pub fn leaderboard(table: &ScoreTable, tiers: &TierThresholds) -> Vec<LeaderboardRow> {
    let mut rows: Vec<_> = table
        .models
        .iter()
        .map(|(model, m)| {
            let s = &m.summary;
            LeaderboardRow {
                model: model.clone(),
                coverage: s.coverage_pct,
                global_hqi: s.global_hqi,
                expected_hqi: s.expected_hqi,
                gap: s.gap,
                pass_rate: s.pass_rate_best_of_k,
                tier: assign_tier(s.global_hqi, tiers),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.global_hqi.total_cmp(&a.global_hqi).then_with(|| a.model.cmp(&b.model)));
    rows
}

fn f1(v: f64) -> String {
    format!("{v:.1}")
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let mut first = true;
        let mut s = String::new();
        for (i, c) in cells.enumerate() {
            if !first {
                s.push_str("  ");
            }
            first = false;
            // first column left-aligned, numbers right-aligned
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[i]);
            } else {
                let _ = write!(s, "{c:>w$}", w = widths[i]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut out, &mut header.iter().copied());
    for r in rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

const LEADERBOARD_HEADER: [&str; 7] = ["model", "coverage", "global_hqi", "expected_hqi", "gap", "pass_rate", "tier"];

fn leaderboard_cells(rows: &[LeaderboardRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.model.clone(),
                f1(r.coverage),
                f1(r.global_hqi),
                f1(r.expected_hqi),
                f1(r.gap),
                f1(r.pass_rate),
                r.tier.to_string(),
            ]
        })
        .collect()
}

pub fn leaderboard_text(rows: &[LeaderboardRow]) -> String {
    aligned(&LEADERBOARD_HEADER, &leaderboard_cells(rows))
}

pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> String {
    csv(&LEADERBOARD_HEADER, &leaderboard_cells(rows))
}

/// Category × model matrices; `None` where a model has no score for a category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub models: Vec<String>,
    pub categories: Vec<String>,
    pub best_of_k: Vec<Vec<Option<f64>>>,
    pub per_attempt: Vec<Vec<Option<f64>>>,
}

/// Columns follow the leaderboard. Rows are ordered by the mean best-of-k
/// score of tier-1 models, or of all models when no model reaches tier 1.
pub fn heatmap(table: &ScoreTable, tiers: &TierThresholds) -> Heatmap {
    let board = leaderboard(table, tiers);
    let models: Vec<String> = board.iter().map(|r| r.model.clone()).collect();
    let mut categories: Vec<String> = table
        .models
        .values()
        .flat_map(|m| m.summary.per_category.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let any_tier1 = board.iter().any(|r| r.tier == 1);
    let ranking_models: Vec<&str> = board
        .iter()
        .filter(|r| !any_tier1 || r.tier == 1)
        .map(|r| r.model.as_str())
        .collect();
    let mean_for = |cat: &str| {
        let vals: Vec<f64> = ranking_models
            .iter()
            .filter_map(|m| table.models[*m].summary.per_category.get(cat).map(|c| c.best_of_k))
            .collect();
        if vals.is_empty() {
            f64::NEG_INFINITY
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let means: BTreeMap<String, f64> = categories.iter().map(|c| (c.clone(), mean_for(c))).collect();
    categories.sort_by(|a, b| means[b].total_cmp(&means[a]).then_with(|| a.cmp(b)));
    let matrix = |pick: fn(&crate::scoring::CategoryScore) -> f64| {
        categories
            .iter()
            .map(|c| {
                models
                    .iter()
                    .map(|m| table.models[m].summary.per_category.get(c).map(pick))
                    .collect()
            })
            .collect()
    };
    Heatmap {
        best_of_k: matrix(|c| c.best_of_k),
        per_attempt: matrix(|c| c.per_attempt),
        models,
        categories,
    }
}

fn matrix_csv(h: &Heatmap, m: &[Vec<Option<f64>>]) -> String {
    let mut header = vec!["category"];
    header.extend(h.models.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = h
        .categories
        .iter()
        .zip(m)
        .map(|(c, vals)| {
            std::iter::once(c.clone())
                .chain(vals.iter().map(|v| v.map(f1).unwrap_or_default()))
                .collect()
        })
        .collect();
    csv(&header, &rows)
}

impl Heatmap {
    pub fn best_of_k_csv(&self) -> String {
        matrix_csv(self, &self.best_of_k)
    }

    pub fn per_attempt_csv(&self) -> String {
        matrix_csv(self, &self.per_attempt)
    }
}

/// Most frequent subtype per model; ties go to the higher-precedence subtype.
pub fn failure_signatures(tags: &[TaggedFailure]) -> BTreeMap<String, (FailureSubtype, usize)> {
    let mut counts: BTreeMap<&str, BTreeMap<FailureSubtype, usize>> = BTreeMap::new();
    for t in tags {
        *counts.entry(&t.model).or_default().entry(t.tag.subtype).or_default() += 1;
    }
    counts
        .into_iter()
        .filter_map(|(m, c)| {
            c.into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|top| (m.to_string(), top))
        })
        .collect()
}

fn group_label(g: GroupBy) -> &'static str {
    match g {
        GroupBy::Model => "model",
        GroupBy::Benchmark => "benchmark",
        GroupBy::AccessType => "access_type",
        GroupBy::Subtype => "subtype",
    }
}

pub fn failure_text(b: &Breakdown, tags: &[TaggedFailure]) -> String {
    let rows: Vec<Vec<String>> = b
        .rows
        .iter()
        .map(|r| vec![r.group.clone(), r.subtype.to_string(), r.count.to_string(), f1(r.pct)])
        .collect();
    let mut out = aligned(&[group_label(b.group_by), "subtype", "count", "pct"], &rows);
    let _ = writeln!(out, "total tags: {}", b.total);
    let sigs = failure_signatures(tags);
    if !sigs.is_empty() {
        out.push_str("\nper-model signature:\n");
        let rows: Vec<Vec<String>> = sigs
            .iter()
            .map(|(m, (s, n))| vec![m.clone(), s.to_string(), n.to_string()])
            .collect();
        out.push_str(&aligned(&["model", "top_subtype", "count"], &rows));
    }
    out
}

/// One row per group: total, then count and within-group percent for each
/// of the nine subtypes.
pub fn failure_csv(b: &Breakdown) -> String {
    let mut header: Vec<String> = vec![group_label(b.group_by).into(), "total".into()];
    for s in FailureSubtype::ALL {
        header.push(s.to_string());
        header.push(format!("{s}_pct"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = b
        .group_totals
        .iter()
        .map(|(g, total)| {
            let mut row = vec![g.clone(), total.to_string()];
            for s in FailureSubtype::ALL {
                match b.rows.iter().find(|r| &r.group == g && r.subtype == s) {
                    Some(r) => {
                        row.push(r.count.to_string());
                        row.push(f1(r.pct));
                    }
                    None => {
                        row.push("0".into());
                        row.push(f1(0.0));
                    }
                }
            }
            row
        })
        .collect();
    csv(&header, &rows)
}

const INFERENCE_HEADER: [&str; 9] = [
    "model",
    "attempts",
    "median_cost_usd",
    "reasoning_ratio",
    "label",
    "median_throughput_tok_s",
    "median_ttft_s",
    "completion_tokens_median",
    "completion_tokens_iqr",
];

fn inference_cells(s: &BTreeMap<String, InferenceSummary>) -> Vec<Vec<String>> {
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
    s.iter()
        .map(|(m, i)| {
            vec![
                m.clone(),
                i.attempts.to_string(),
                opt(i.median_cost_usd, 6),
                opt(i.reasoning_ratio, 3),
                if i.reasoning { "reasoning" } else { "non-reasoning" }.into(),
                opt(i.median_throughput_tok_per_s, 1),
                opt(i.median_ttft_s, 3),
                opt(i.completion_tokens.map(|q| q.median), 1),
                opt(i.completion_tokens.map(|q| q.q3 - q.q1), 1),
            ]
        })
        .collect()
}

pub fn inference_text(s: &BTreeMap<String, InferenceSummary>) -> String {
    aligned(&INFERENCE_HEADER, &inference_cells(s))
}

pub fn inference_csv(s: &BTreeMap<String, InferenceSummary>) -> String {
    csv(&INFERENCE_HEADER, &inference_cells(s))
}

fn rho_cell(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into())
}

pub fn sensitivity_text(r: &SensitivityReport) -> String {
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let leader = row
                .ranks
                .iter()
                .filter(|(_, &rank)| rank == 1.0)
                .map(|(m, _)| m.as_str())
                .collect::<Vec<_>>()
                .join("|");
            vec![
                format!("{}", row.config.w_area),
                format!("{}", row.config.w_delay),
                format!("{}", row.config.w_warn),
                rho_cell(row.rho),
                format!("{}", row.max_displacement),
                leader,
            ]
        })
        .collect();
    let mut out = aligned(&["w_area", "w_delay", "w_warn", "rho", "max_displacement", "leader"], &rows);
    let _ = writeln!(
        out,
        "baseline {}; min rho {}; max displacement {}",
        r.baseline,
        rho_cell(r.min_rho()),
        r.max_displacement()
    );
    out
}

pub fn sensitivity_csv(r: &SensitivityReport) -> String {
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            vec![
                format!("{}", row.config.w_area),
                format!("{}", row.config.w_delay),
                format!("{}", row.config.w_warn),
                row.rho.map(|v| format!("{v:.4}")).unwrap_or_default(),
                format!("{}", row.max_displacement),
            ]
        })
        .collect();
    csv(&["w_area", "w_delay", "w_warn", "rho", "max_displacement"], &rows)
}

fn xlib_cells(rows: &[XlibRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.library_id.clone(),
                r.metric.as_str().into(),
                r.n.to_string(),
                rho_cell(r.rho),
                r.attrition.to_string(),
            ]
        })
        .collect()
}

const XLIB_HEADER: [&str; 5] = ["library", "metric", "n", "rho", "attrition"];

pub fn xlib_text(rows: &[XlibRow]) -> String {
    aligned(&XLIB_HEADER, &xlib_cells(rows))
}

pub fn xlib_csv(rows: &[XlibRow]) -> String {
    csv(&XLIB_HEADER, &xlib_cells(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::ScoredModel;
    use crate::scoring::{CategoryScore, ModelSummary, WeightConfig};
    use crate::task::AccessType;

    fn summary(global: f64, expected: f64, cats: &[(&str, f64, f64)]) -> ModelSummary {
        ModelSummary {
            coverage_pct: 87.5,
            global_hqi: global,
            expected_hqi: expected,
            pass_rate_best_of_k: 87.5,
            pass_rate_unweighted: 90.0,
            gap: global - expected,
            tasks: 4,
            golden_tasks: 4,
            per_category: cats
                .iter()
                .map(|(c, b, p)| {
                    (
                        c.to_string(),
                        CategoryScore {
                            best_of_k: *b,
                            per_attempt: *p,
                            weight_mass: 1.0,
                            golden_tasks: 1,
                        },
                    )
                })
                .collect(),
        }
    }

    fn table(models: &[(&str, ModelSummary)]) -> ScoreTable {
        ScoreTable {
            schema: 1,
            journal_digest: String::new(),
            weights: WeightConfig::default(),
            k: 3,
            models: models
                .iter()
                .map(|(m, s)| {
                    (
                        m.to_string(),
                        ScoredModel {
                            access_type: AccessType::Proprietary,
                            summary: s.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn tier_boundaries() {
        let t = TierThresholds::default();
        assert_eq!(assign_tier(71.0, &t), 1);
        assert_eq!(assign_tier(70.99, &t), 2);
        assert_eq!(assign_tier(53.0, &t), 2);
        assert_eq!(assign_tier(52.99, &t), 3);
    }

    #[test]
    fn leaderboard_formats_one_decimal() {
        let t = table(&[("low", summary(40.0, 30.0, &[])), ("top", summary(85.1, 78.5, &[]))]);
        let rows = leaderboard(&t, &TierThresholds::default());
        assert_eq!(rows[0].model, "top");
        let csv = leaderboard_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "top,87.5,85.1,78.5,6.6,87.5,1");
        assert_eq!(csv.lines().nth(2).unwrap(), "low,87.5,40.0,30.0,10.0,87.5,3");
        assert!(leaderboard_text(&rows).starts_with("model"));
    }

    #[test]
    fn heatmap_orders_and_bounds() {
        let t = table(&[
            ("a", summary(80.0, 60.0, &[("x", 70.0, 50.0), ("y", 90.0, 60.0)])),
            ("b", summary(60.0, 50.0, &[("x", 95.0, 80.0), ("y", 20.0, 10.0)])),
        ]);
        let h = heatmap(&t, &TierThresholds::default());
        assert_eq!(h.models, ["a", "b"]);
        // only `a` is tier 1, so its scores order the rows
        assert_eq!(h.categories, ["y", "x"]);
        for (b, p) in h.best_of_k.iter().flatten().zip(h.per_attempt.iter().flatten()) {
            assert!(p.unwrap() <= b.unwrap());
        }
        assert_eq!(h.best_of_k_csv(), "category,a,b\ny,90.0,20.0\nx,70.0,95.0\n");
    }

    #[test]
    fn csv_quotes_when_needed() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
