// SPDX-License-Identifier: Apache-2.0

//! Hardware Quality Index and the model-level aggregates built on it.

mod aggregate;
mod sensitivity;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::toolchain::SynthMetrics;

pub use aggregate::{aggregate_model, per_category_scores, CategoryScore, CategoryScores, ModelSummary, ScoredAttempt};
pub use sensitivity::{
    default_sensitivity_configs, weight_sensitivity, weight_sensitivity_with, MetricAttempt, SensitivityCohort, SensitivityReport,
    SensitivityRow,
};

/// Ratios below this are floored so near-zero golden delays never divide
/// by zero.
pub const RATIO_FLOOR: f64 = 1e-9;
pub const HQI_CAP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("invalid weights ({0})")]
    InvalidWeights(String),
    #[error("golden area must be positive, got {0}")]
    NonPositiveGoldenArea(f64),
    #[error("candidate metrics are not finite")]
    NonFiniteMetrics,
    #[error("incomplete campaign: task `{task}` has {count} attempt record(s), expected {expected}")]
    Incomplete { task: String, count: usize, expected: u32 },
    #[error("record for unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` attempt {attempt}: {reason}")]
    InconsistentRecord { task: String, attempt: u32, reason: String },
    #[error("task `{task}` has invalid complexity weight {weight}")]
    InvalidTaskWeight { task: String, weight: f64 },
    #[error("{0}")]
    Sensitivity(String),
}

/// Coefficients of the HQI cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub w_area: f64,
    pub w_delay: f64,
    pub w_warn: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self::new(0.5, 0.5, 0.1)
    }
}

impl WeightConfig {
    pub const fn new(w_area: f64, w_delay: f64, w_warn: f64) -> Self {
        Self { w_area, w_delay, w_warn }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        let all = [self.w_area, self.w_delay, self.w_warn];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoringError::InvalidWeights(format!("{self} has a negative or non-finite entry")));
        }
        if self.w_area + self.w_delay <= 0.0 {
            return Err(ScoringError::InvalidWeights(format!("{self}: area and delay weights are both zero")));
        }
        Ok(())
    }
}

impl std::fmt::Display for WeightConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.w_area, self.w_delay, self.w_warn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HqiScore {
    /// The attempt did not clear every gate.
    Failed,
    /// The task has no valid golden reference.
    NoGolden,
    Scored {
        value: f64,
        area_ratio: f64,
        delay_ratio: f64,
        excess_warnings: u64,
    },
}

impl HqiScore {
    /// 0 for failures, NaN without a golden, else the capped score.
    pub fn value(&self) -> f64 {
        match self {
            HqiScore::Failed => 0.0,
            HqiScore::NoGolden => f64::NAN,
            HqiScore::Scored { value, .. } => *value,
        }
    }
}

/// HQI of one attempt. `metrics` is `None` when the attempt failed a gate;
/// that case scores 0 before the golden is consulted.
pub fn attempt_hqi(
    metrics: Option<&SynthMetrics>,
    golden: Option<&SynthMetrics>,
    w: &WeightConfig,
) -> Result<HqiScore, ScoringError> {
    w.validate()?;
    let Some(m) = metrics else {
        return Ok(HqiScore::Failed);
    };
    let Some(g) = golden else {
        return Ok(HqiScore::NoGolden);
    };
    if !(g.area > 0.0 && g.area.is_finite()) {
        return Err(ScoringError::NonPositiveGoldenArea(g.area));
    }
    if !(m.area.is_finite() && m.delay.is_finite()) || m.area < 0.0 || m.delay < 0.0 {
        return Err(ScoringError::NonFiniteMetrics);
    }
    let area_ratio = m.area / g.area;
    let delay_ratio = m.delay.max(RATIO_FLOOR) / g.delay.max(RATIO_FLOOR);
    let excess_warnings = m.warnings.saturating_sub(g.warnings);
    let cost = w.w_area * area_ratio + w.w_delay * delay_ratio + w.w_warn * excess_warnings as f64;
    let value = if cost <= 0.0 { HQI_CAP } else { (HQI_CAP / cost).min(HQI_CAP) };
    Ok(HqiScore::Scored {
        value,
        area_ratio,
        delay_ratio,
        excess_warnings,
    })
}

#[cfg(test)]
pub(crate) fn metrics(area: f64, delay: f64, warnings: u64) -> SynthMetrics {
    SynthMetrics {
        area,
        delay,
        warnings,
        library_id: "lib".into(),
    }
}
