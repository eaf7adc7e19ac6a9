// SPDX-License-Identifier: Apache-2.0

//! Re-ranking models under alternative HQI weightings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{aggregate_model, attempt_hqi, ScoredAttempt, ScoringError, WeightConfig};
use crate::exec::map_ordered;
use crate::robustness::{rank_agreement, RankVector};
use crate::toolchain::SynthMetrics;

/// Area-only, delay-only, the default, elevated warnings, then a sweep of
/// area/delay splits at two warning weights.
pub fn default_sensitivity_configs() -> Vec<WeightConfig> {
    [
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.5, 0.5, 0.1),
        (0.5, 0.5, 0.3),
        (0.3, 0.7, 0.1),
        (0.4, 0.6, 0.1),
        (0.6, 0.4, 0.1),
        (0.7, 0.3, 0.1),
        (0.3, 0.7, 0.3),
        (0.7, 0.3, 0.3),
    ]
    .into_iter()
    .map(|(a, d, w)| WeightConfig::new(a, d, w))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAttempt {
    pub task: String,
    pub attempt: u32,
    /// Default-library metrics; `Some` iff every gate passed.
    pub metrics: Option<SynthMetrics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensitivityCohort {
    pub models: BTreeMap<String, Vec<MetricAttempt>>,
    /// Valid golden metrics per task.
    pub goldens: BTreeMap<String, SynthMetrics>,
    pub task_weights: BTreeMap<String, f64>,
    pub k: u32,
}

impl SensitivityCohort {
    /// Global HQI of every model under `w`.
    pub fn global_hqi(&self, w: &WeightConfig) -> Result<BTreeMap<String, f64>, ScoringError> {
        let golden_set: BTreeSet<String> = self.goldens.keys().cloned().collect();
        self.models
            .iter()
            .map(|(model, attempts)| {
                let records = attempts
                    .iter()
                    .map(|a| {
                        let hqi = attempt_hqi(a.metrics.as_ref(), self.goldens.get(&a.task), w)?;
                        Ok(ScoredAttempt {
                            task: a.task.clone(),
                            attempt: a.attempt,
                            passed: a.metrics.is_some(),
                            hqi: hqi.value(),
                        })
                    })
                    .collect::<Result<Vec<_>, ScoringError>>()?;
                let s = aggregate_model(&records, &self.task_weights, &golden_set, self.k)?;
                Ok((model.clone(), s.global_hqi))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub config: WeightConfig,
    pub global_hqi: BTreeMap<String, f64>,
    /// Rank 1 is the best model; ties share average ranks.
    pub ranks: BTreeMap<String, f64>,
    /// Agreement with the baseline ranking; `None` when undefined.
    pub rho: Option<f64>,
    pub max_displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub baseline: WeightConfig,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    pub fn min_rho(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.rho).reduce(f64::min)
    }

    pub fn max_displacement(&self) -> f64 {
        self.rows.iter().map(|r| r.max_displacement).fold(0.0, f64::max)
    }
}

pub fn weight_sensitivity(
    cohort: &SensitivityCohort,
    configs: &[WeightConfig],
) -> Result<SensitivityReport, ScoringError> {
    weight_sensitivity_with(cohort, configs, 0)
}

/// As [`weight_sensitivity`], evaluating configs on `workers` threads.
pub fn weight_sensitivity_with(
    cohort: &SensitivityCohort,
    configs: &[WeightConfig],
    workers: usize,
) -> Result<SensitivityReport, ScoringError> {
    if cohort.models.len() < 2 {
        return Err(ScoringError::Sensitivity(format!(
            "need at least two models, got {}",
            cohort.models.len()
        )));
    }
    if configs.len() < 2 {
        return Err(ScoringError::Sensitivity(format!(
            "need at least two weight configs, got {}",
            configs.len()
        )));
    }
    for c in configs {
        c.validate()?;
    }
    let baseline = WeightConfig::default();
    let to_rv = |g: BTreeMap<String, f64>| {
        RankVector::new(g).map_err(|e| ScoringError::Sensitivity(e.to_string()))
    };
    let base = to_rv(cohort.global_hqi(&baseline)?)?;
    let base_ranks = base.descending_ranks();
    let rows = map_ordered(configs, workers, |c| -> Result<SensitivityRow, ScoringError> {
        let global_hqi = cohort.global_hqi(c)?;
        let rv = to_rv(global_hqi.clone())?;
        let ranks = rv.descending_ranks();
        let max_displacement = ranks
            .iter()
            .map(|(m, r)| (r - base_ranks[m]).abs())
            .fold(0.0, f64::max);
        Ok(SensitivityRow {
            config: *c,
            global_hqi,
            ranks,
            rho: rank_agreement(&base, &rv),
            max_displacement,
        })
    });
    Ok(SensitivityReport {
        baseline,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}
