// SPDX-License-Identifier: Apache-2.0

//! Rank statistics and cross-library agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{aggregate_model, attempt_hqi, ScoredAttempt, ScoringError, WeightConfig};
use crate::toolchain::SynthMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustnessError {
    #[error("rank correlation needs at least two subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("subject sets differ")]
    SubjectMismatch,
    #[error("duplicate subject `{0}`")]
    DuplicateSubject(String),
    #[error("score for `{0}` is not finite")]
    NonFinite(String),
    #[error("correlation undefined: {0} vector is constant")]
    ConstantVector(&'static str),
    #[error("rank-difference shortcut requires tie-free vectors")]
    Ties,
    #[error("library `{0}` does not appear in the journal")]
    LibraryAbsent(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// Scores keyed by subject id (model or design).
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    scores: BTreeMap<String, f64>,
}

impl RankVector {
    pub fn new<I, S>(pairs: I) -> Result<Self, RobustnessError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut scores = BTreeMap::new();
        for (s, v) in pairs {
            let s = s.into();
            if !v.is_finite() {
                return Err(RobustnessError::NonFinite(s));
            }
            if scores.insert(s.clone(), v).is_some() {
                return Err(RobustnessError::DuplicateSubject(s));
            }
        }
        Ok(Self { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn scores(&self) -> Vec<f64> {
        self.scores.values().copied().collect()
    }

    /// Average ranks in subject order; rank 1 is the smallest score.
    pub fn ranks(&self) -> Vec<f64> {
        average_ranks(&self.scores())
    }

    /// Ranks keyed by subject, rank 1 the *highest* score (leaderboard order).
    pub fn descending_ranks(&self) -> BTreeMap<String, f64> {
        let neg: Vec<f64> = self.scores.values().map(|v| -v).collect();
        self.scores.keys().cloned().zip(average_ranks(&neg)).collect()
    }
}

/// Average (fractional) ranks, 1-based; tied values share the mean of the
/// positions they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, RobustnessError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(RobustnessError::ConstantVector("first"));
    }
    if syy == 0.0 {
        return Err(RobustnessError::ConstantVector("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn aligned(a: &RankVector, b: &RankVector) -> Result<(Vec<f64>, Vec<f64>), RobustnessError> {
    if !a.scores.keys().eq(b.scores.keys()) {
        return Err(RobustnessError::SubjectMismatch);
    }
    if a.len() < 2 {
        return Err(RobustnessError::TooFewSubjects(a.len()));
    }
    Ok((a.scores(), b.scores()))
}

/// Tie-aware Spearman correlation: Pearson correlation of average ranks.
pub fn spearman_rho(a: &RankVector, b: &RankVector) -> Result<f64, RobustnessError> {
    let (x, y) = aligned(a, b)?;
    pearson(&average_ranks(&x), &average_ranks(&y))
}

/// `1 − 6Σd²/(n(n²−1))`; only valid without ties.
pub fn spearman_shortcut(a: &RankVector, b: &RankVector) -> Result<f64, RobustnessError> {
    let (x, y) = aligned(a, b)?;
    let has_ties = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).any(|w| w[0] == w[1])
    };
    if has_ties(&x) || has_ties(&y) {
        return Err(RobustnessError::Ties);
    }
    let (rx, ry) = (average_ranks(&x), average_ranks(&y));
    let d2: f64 = rx.iter().zip(&ry).map(|(p, q)| (p - q) * (p - q)).sum();
    let n = x.len() as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Spearman ρ, except that identical rank vectors agree perfectly even when
/// they are constant. `None` when the correlation is undefined.
pub fn rank_agreement(a: &RankVector, b: &RankVector) -> Option<f64> {
    let (x, y) = aligned(a, b).ok()?;
    if average_ranks(&x) == average_ranks(&y) {
        return Some(1.0);
    }
    pearson(&average_ranks(&x), &average_ranks(&y)).ok()
}

/// One passing design's synthesis results across libraries. A library mapped
/// to `None` failed for this design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignObservation {
    pub model: String,
    pub task: String,
    pub attempt: u32,
    pub libraries: BTreeMap<String, Option<SynthMetrics>>,
}

impl DesignObservation {
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.model, self.task, self.attempt)
    }
}

/// Everything the cross-library analysis needs, independent of how the
/// journal stores it.
#[derive(Debug, Clone)]
pub struct CrossLibraryInput {
    pub default_library: String,
    pub models: BTreeSet<String>,
    /// Designs that cleared every gate under the default library.
    pub passing: Vec<DesignObservation>,
    /// Task → library → golden metrics (valid goldens only).
    pub goldens: BTreeMap<String, BTreeMap<String, SynthMetrics>>,
    pub task_weights: BTreeMap<String, f64>,
    pub k: u32,
    pub weights: WeightConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XlibMetric {
    Area,
    Delay,
    ModelGlobalHqi,
}

impl XlibMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            XlibMetric::Area => "area",
            XlibMetric::Delay => "delay",
            XlibMetric::ModelGlobalHqi => "model_global_hqi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XlibRow {
    pub library_id: String,
    pub metric: XlibMetric,
    pub n: usize,
    pub rho: Option<f64>,
    /// Designs passing the default library that failed this one.
    pub attrition: usize,
}

fn model_globals(input: &CrossLibraryInput, library: &str) -> Result<BTreeMap<String, f64>, RobustnessError> {
    let golden_set: BTreeSet<String> = input
        .goldens
        .iter()
        .filter(|(_, libs)| libs.contains_key(library))
        .map(|(t, _)| t.clone())
        .collect();
    let mut passing: BTreeMap<(&str, &str, u32), &DesignObservation> = BTreeMap::new();
    for d in &input.passing {
        passing.insert((d.model.as_str(), d.task.as_str(), d.attempt), d);
    }
    let mut out = BTreeMap::new();
    for model in &input.models {
        let mut records = Vec::new();
        for task in input.task_weights.keys() {
            for attempt in 1..=input.k {
                let obs = passing.get(&(model.as_str(), task.as_str(), attempt));
                let metrics = obs.and_then(|d| d.libraries.get(library)).and_then(Option::as_ref);
                let golden = input.goldens.get(task).and_then(|g| g.get(library));
                let hqi = attempt_hqi(metrics, golden, &input.weights)?;
                records.push(ScoredAttempt {
                    task: task.clone(),
                    attempt,
                    passed: metrics.is_some(),
                    hqi: hqi.value(),
                });
            }
        }
        let summary = aggregate_model(&records, &input.task_weights, &golden_set, input.k)?;
        out.insert(model.clone(), summary.global_hqi);
    }
    Ok(out)
}

/// Per-design area and delay agreement with the default library, plus
/// agreement of model rankings recomputed with per-library goldens.
pub fn cross_library_report(
    input: &CrossLibraryInput,
    libraries: &[String],
) -> Result<Vec<XlibRow>, RobustnessError> {
    let present: BTreeSet<&str> = input
        .passing
        .iter()
        .flat_map(|d| d.libraries.keys().map(String::as_str))
        .chain(input.goldens.values().flat_map(|g| g.keys().map(String::as_str)))
        .collect();
    let base_globals = model_globals(input, &input.default_library)?;
    let mut rows = Vec::new();
    for lib in libraries {
        if !present.contains(lib.as_str()) {
            return Err(RobustnessError::LibraryAbsent(lib.clone()));
        }
        let mut area = (Vec::new(), Vec::new());
        let mut delay = (Vec::new(), Vec::new());
        let mut attrition = 0;
        for d in &input.passing {
            let base = d.libraries.get(&input.default_library).and_then(Option::as_ref);
            let alt = d.libraries.get(lib).and_then(Option::as_ref);
            match (base, alt) {
                (Some(b), Some(a)) => {
                    area.0.push((d.key(), b.area));
                    area.1.push((d.key(), a.area));
                    delay.0.push((d.key(), b.delay));
                    delay.1.push((d.key(), a.delay));
                }
                _ => attrition += 1,
            }
        }
        for (metric, (base, alt)) in [(XlibMetric::Area, area), (XlibMetric::Delay, delay)] {
            let n = base.len();
            let rho = match (RankVector::new(base), RankVector::new(alt)) {
                (Ok(b), Ok(a)) => rank_agreement(&b, &a),
                _ => None,
            };
            rows.push(XlibRow {
                library_id: lib.clone(),
                metric,
                n,
                rho,
                attrition,
            });
        }
        let alt_globals = model_globals(input, lib)?;
        let rho = rank_agreement(&RankVector::new(base_globals.clone())?, &RankVector::new(alt_globals)?);
        rows.push(XlibRow {
            library_id: lib.clone(),
            metric: XlibMetric::ModelGlobalHqi,
            n: input.models.len(),
            rho,
            attrition,
        });
    }
    Ok(rows)
}
