// SPDX-License-Identifier: Apache-2.0

//! Per-model inference statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::journal::AttemptRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between closest ranks (the common "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceSummary {
    pub attempts: usize,
    pub median_cost_usd: Option<f64>,
    /// Pooled: Σ reasoning / Σ (reasoning + completion).
    pub reasoning_ratio: Option<f64>,
    pub reasoning: bool,
    pub median_throughput_tok_per_s: Option<f64>,
    pub median_ttft_s: Option<f64>,
    pub completion_tokens: Option<Quartiles>,
}

pub fn summarize_inference<'a>(records: impl IntoIterator<Item = &'a AttemptRecord>) -> BTreeMap<String, InferenceSummary> {
    let mut by_model: BTreeMap<&str, Vec<&AttemptRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(&r.model).or_default().push(r);
    }
    by_model
        .into_iter()
        .map(|(model, rs)| {
            let metas: Vec<_> = rs.iter().filter_map(|r| r.generation.as_ref().map(|g| &g.inference)).collect();
            let collect = |f: &dyn Fn(&super::generate::InferenceMeta) -> Option<f64>| -> Vec<f64> {
                metas.iter().filter_map(|m| f(m)).collect()
            };
            let median = |v: Vec<f64>| quartiles(&v).map(|q| q.median);
            let reasoning: Vec<(u64, u64)> = metas
                .iter()
                .filter_map(|m| m.reasoning_tokens.map(|r| (r, m.completion_tokens.unwrap_or(0))))
                .collect();
            let (r_sum, c_sum) = reasoning.iter().fold((0u64, 0u64), |(a, b), (r, c)| (a + r, b + c));
            let reasoning_ratio = if reasoning.is_empty() {
                None
            } else if r_sum + c_sum == 0 {
                Some(0.0)
            } else {
                Some(r_sum as f64 / (r_sum + c_sum) as f64)
            };
            let summary = InferenceSummary {
                attempts: rs.len(),
                median_cost_usd: median(collect(&|m| m.cost_usd)),
                reasoning: r_sum > 0,
                reasoning_ratio,
                median_throughput_tok_per_s: median(collect(&|m| m.throughput_tok_per_s)),
                median_ttft_s: median(collect(&|m| m.ttft_s)),
                completion_tokens: quartiles(&collect(&|m| m.completion_tokens.map(|c| c as f64))),
            };
            (model.to_string(), summary)
        })
        .collect()
}
