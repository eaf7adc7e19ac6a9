// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ScoringError;

/// The scoring-relevant slice of one attempt record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAttempt {
    pub task: String,
    pub attempt: u32,
    /// Cleared every gate.
    pub passed: bool,
    /// 0 for failures, NaN when the task has no golden.
    pub hqi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub best_of_k: f64,
    pub per_attempt: f64,
    /// Sum of complexity weights of the category's golden tasks.
    pub weight_mass: f64,
    pub golden_tasks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub scores: BTreeMap<String, CategoryScore>,
    /// Categories without any golden task.
    pub omitted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub coverage_pct: f64,
    pub global_hqi: f64,
    pub expected_hqi: f64,
    /// Complexity-weighted best-of-k gate success over all tasks, percent.
    pub pass_rate_best_of_k: f64,
    /// Same, every task weighted 1.
    pub pass_rate_unweighted: f64,
    pub gap: f64,
    pub tasks: usize,
    pub golden_tasks: usize,
    #[serde(default)]
    pub per_category: BTreeMap<String, CategoryScore>,
}

#[derive(Debug, Clone, Copy)]
struct TaskStat {
    passed: bool,
    max: f64,
    mean: f64,
}

fn task_stats(
    records: &[ScoredAttempt],
    weights: &BTreeMap<String, f64>,
    golden_set: &BTreeSet<String>,
    k: u32,
) -> Result<BTreeMap<String, TaskStat>, ScoringError> {
    for (task, &weight) in weights {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(ScoringError::InvalidTaskWeight { task: task.clone(), weight });
        }
    }
    let mut by_task: BTreeMap<&str, Vec<&ScoredAttempt>> = weights.keys().map(|t| (t.as_str(), Vec::new())).collect();
    for r in records {
        by_task
            .get_mut(r.task.as_str())
            .ok_or_else(|| ScoringError::UnknownTask(r.task.clone()))?
            .push(r);
    }
    let mut out = BTreeMap::new();
    for (task, mut rs) in by_task {
        rs.sort_by_key(|r| r.attempt);
        let attempts: Vec<u32> = rs.iter().map(|r| r.attempt).collect();
        if attempts != (1..=k).collect::<Vec<_>>() {
            return Err(ScoringError::Incomplete {
                task: task.to_string(),
                count: rs.len(),
                expected: k,
            });
        }
        let golden = golden_set.contains(task);
        for r in &rs {
            let bad = |reason: &str| ScoringError::InconsistentRecord {
                task: task.to_string(),
                attempt: r.attempt,
                reason: reason.to_string(),
            };
            if golden {
                if r.hqi.is_nan() || !(0.0..=100.0).contains(&r.hqi) {
                    return Err(bad("HQI outside [0, 100] for a golden task"));
                }
                if !r.passed && r.hqi != 0.0 {
                    return Err(bad("failed attempt with non-zero HQI"));
                }
                if r.passed && r.hqi == 0.0 {
                    return Err(bad("passing attempt with zero HQI"));
                }
            }
        }
        let passed = rs.iter().any(|r| r.passed);
        let (max, mean) = if golden {
            let max = rs.iter().map(|r| r.hqi).fold(0.0, f64::max);
            let mean = rs.iter().map(|r| r.hqi).sum::<f64>() / k as f64;
            // guard the mean against rounding above the maximum
            (max, mean.min(max))
        } else {
            (f64::NAN, f64::NAN)
        };
        out.insert(task.to_string(), TaskStat { passed, max, mean });
    }
    Ok(out)
}

/// Coverage, Global HQI, Expected HQI and pass rates for one model.
///
/// `weights` defines the task universe; `golden_set` the tasks with valid
/// goldens. Tasks outside `golden_set` only affect coverage and pass rates.
pub fn aggregate_model(
    records: &[ScoredAttempt],
    weights: &BTreeMap<String, f64>,
    golden_set: &BTreeSet<String>,
    k: u32,
) -> Result<ModelSummary, ScoringError> {
    let stats = task_stats(records, weights, golden_set, k)?;
    let mut total_w = 0.0;
    let mut solved_w = 0.0;
    let mut solved_n = 0usize;
    let mut golden_w = 0.0;
    let mut best = 0.0;
    let mut expected = 0.0;
    let mut golden_tasks = 0;
    for (task, s) in &stats {
        let w = weights[task];
        total_w += w;
        if s.passed {
            solved_w += w;
            solved_n += 1;
        }
        if golden_set.contains(task) {
            golden_tasks += 1;
            golden_w += w;
            best += w * s.max;
            expected += w * s.mean;
        }
    }
    let pct = |num: f64, den: f64| if den > 0.0 { 100.0 * num / den } else { 0.0 };
    let (global_hqi, expected_hqi) = if golden_w > 0.0 {
        (best / golden_w, expected / golden_w)
    } else {
        (0.0, 0.0)
    };
    let coverage_pct = pct(solved_w, total_w);
    Ok(ModelSummary {
        coverage_pct,
        global_hqi,
        expected_hqi,
        pass_rate_best_of_k: coverage_pct,
        pass_rate_unweighted: pct(solved_n as f64, stats.len() as f64),
        gap: global_hqi - expected_hqi,
        tasks: stats.len(),
        golden_tasks,
        per_category: BTreeMap::new(),
    })
}

/// Weighted best-of-k and per-attempt HQI within each category.
pub fn per_category_scores(
    records: &[ScoredAttempt],
    weights: &BTreeMap<String, f64>,
    golden_set: &BTreeSet<String>,
    categories: &BTreeMap<String, String>,
    k: u32,
) -> Result<CategoryScores, ScoringError> {
    let stats = task_stats(records, weights, golden_set, k)?;
    let mut acc: BTreeMap<&str, (f64, f64, f64, usize)> = BTreeMap::new();
    for task in weights.keys() {
        let cat = categories
            .get(task)
            .ok_or_else(|| ScoringError::UnknownTask(task.clone()))?;
        let e = acc.entry(cat.as_str()).or_default();
        if golden_set.contains(task) {
            let (w, s) = (weights[task], &stats[task]);
            e.0 += w * s.max;
            e.1 += w * s.mean;
            e.2 += w;
            e.3 += 1;
        }
    }
    let mut out = CategoryScores::default();
    for (cat, (best, mean, mass, n)) in acc {
        if n == 0 {
            log::info!("category `{cat}` has no golden task; omitted from quality scores");
            out.omitted.push(cat.to_string());
            continue;
        }
        out.scores.insert(
            cat.to_string(),
            CategoryScore {
                best_of_k: best / mass,
                per_attempt: mean / mass,
                weight_mass: mass,
                golden_tasks: n,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(task: &str, attempt: u32, hqi: f64) -> ScoredAttempt {
        ScoredAttempt {
            task: task.into(),
            attempt,
            passed: hqi > 0.0 || hqi.is_nan(),
            hqi,
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn w(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(t, w)| (t.to_string(), *w)).collect()
    }

    #[test]
    fn perfect_model() {
        let recs: Vec<_> = ["a", "b"].iter().flat_map(|t| (1..=3).map(move |i| rec(t, i, 100.0))).collect();
        let s = aggregate_model(&recs, &w(&[("a", 1.0), ("b", 7.0)]), &set(&["a", "b"]), 3).unwrap();
        assert_eq!((s.coverage_pct, s.global_hqi, s.expected_hqi, s.gap), (100.0, 100.0, 100.0, 0.0));
    }

    #[test]
    fn single_task_gap() {
        let recs: Vec<_> = [0.0, 0.0, 0.0, 0.0, 80.0].iter().zip(1..).map(|(&h, i)| rec("t", i, h)).collect();
        let s = aggregate_model(&recs, &w(&[("t", 3.0)]), &set(&["t"]), 5).unwrap();
        assert_eq!(s.global_hqi, 80.0);
        assert!((s.expected_hqi - 16.0).abs() < 1e-12);
        assert!((s.gap - 64.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_coverage() {
        let recs = vec![rec("t1", 1, 100.0), rec("t2", 1, 0.0)];
        let s = aggregate_model(&recs, &w(&[("t1", 1.0), ("t2", 24.0)]), &set(&["t1", "t2"]), 1).unwrap();
        assert!((s.coverage_pct - 4.0).abs() < 1e-12);
        assert_eq!(s.pass_rate_unweighted, 50.0);
    }

    #[test]
    fn missing_attempt_is_incomplete() {
        let recs = vec![rec("t", 1, 10.0)];
        let err = aggregate_model(&recs, &w(&[("t", 1.0)]), &set(&["t"]), 2).unwrap_err();
        assert_eq!(
            err,
            ScoringError::Incomplete {
                task: "t".into(),
                count: 1,
                expected: 2
            }
        );
    }

    #[test]
    fn nan_tasks_count_for_coverage_only() {
        let recs = vec![rec("g", 1, 50.0), rec("n", 1, f64::NAN)];
        let s = aggregate_model(&recs, &w(&[("g", 1.0), ("n", 1.0)]), &set(&["g"]), 1).unwrap();
        assert_eq!(s.global_hqi, 50.0);
        assert_eq!(s.coverage_pct, 100.0);
        assert_eq!(s.golden_tasks, 1);
    }

    #[test]
    fn categories_partition_global() {
        let recs = vec![rec("a", 1, 90.0), rec("b", 1, 30.0), rec("c", 1, 60.0), rec("d", 1, f64::NAN)];
        let weights = w(&[("a", 2.0), ("b", 5.0), ("c", 11.0), ("d", 1.0)]);
        let golden = set(&["a", "b", "c"]);
        let cats: BTreeMap<String, String> = [("a", "x"), ("b", "x"), ("c", "y"), ("d", "z")]
            .iter()
            .map(|(t, c)| (t.to_string(), c.to_string()))
            .collect();
        let s = aggregate_model(&recs, &weights, &golden, 1).unwrap();
        let c = per_category_scores(&recs, &weights, &golden, &cats, 1).unwrap();
        assert_eq!(c.omitted, ["z"]);
        let mass: f64 = c.scores.values().map(|v| v.weight_mass).sum();
        let recombined: f64 = c.scores.values().map(|v| v.best_of_k * v.weight_mass).sum::<f64>() / mass;
        assert!((recombined - s.global_hqi).abs() < 1e-9);
        assert!((c.scores["x"].best_of_k - (2.0 * 90.0 + 5.0 * 30.0) / 7.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_records_rejected() {
        let bad = vec![ScoredAttempt {
            task: "t".into(),
            attempt: 1,
            passed: false,
            hqi: 40.0,
        }];
        assert!(matches!(
            aggregate_model(&bad, &w(&[("t", 1.0)]), &set(&["t"]), 1),
            Err(ScoringError::InconsistentRecord { .. })
        ));
        assert!(matches!(
            aggregate_model(&[rec("u", 1, 1.0)], &w(&[("t", 1.0)]), &set(&[]), 1),
            Err(ScoringError::UnknownTask(_))
        ));
    }
}
