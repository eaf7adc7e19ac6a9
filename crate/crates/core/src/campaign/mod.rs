// SPDX-License-Identifier: Apache-2.0

//! Models × tasks × attempts: generation, gating, journaling and scoring.

mod config;
mod extract;
mod generate;
mod golden;
mod inference;
mod journal;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{EndpointConfig, HarnessConfig, ModelConfig, TierThresholds, CONFIG_SCHEMA};
pub use extract::{extract_code, Extraction};
pub use generate::{
    ChatEndpoint, GenerationRecord, Generator, InferenceMeta, PregenDir, Sleeper, ThreadSleeper, RETRY_BACKOFF,
};
pub use golden::{compute_golden_metrics, GoldenCache, GoldenEntry, GOLDEN_SCHEMA};
pub use inference::{quantile, quartiles, summarize_inference, InferenceSummary, Quartiles};
pub use journal::{
    attempt_key, canonical_text, read_journal, AttemptOutcome, AttemptRecord, Clock, FrozenClock, JournalSnapshot,
    JournalWriter, LibraryOutcome, SystemClock, JOURNAL_SCHEMA,
};
pub use manifest::{load_manifest, MANIFEST_SCHEMA};

use crate::exec::map_ordered;
use crate::frontend::VerilogSource;
use crate::robustness::{CrossLibraryInput, DesignObservation, RobustnessError};
use crate::scoring::{
    aggregate_model, attempt_hqi, per_category_scores, MetricAttempt, ModelSummary, ScoredAttempt, ScoringError,
    SensitivityCohort, WeightConfig,
};
use crate::task::{AccessType, Task};
use crate::taxonomy::{classify_failure, RuleSet, TaggedFailure, TaxonomyError};
use crate::toolchain::{
    run_gates, synthesize_all_libraries, Backend, GateTrace, InfraError, SynthOutcome, ToolchainConfig,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}:{line}: {reason}")]
    Journal { path: PathBuf, line: usize, reason: String },
    #[error("incomplete journal: {model}/{task} has {count} of {expected} attempts")]
    Incomplete {
        model: String,
        task: String,
        count: usize,
        expected: u32,
    },
    #[error("{count} attempt(s) ended in infrastructure failure (first: {first}); rerun `run` to retry them")]
    Infrastructure { count: usize, first: String },
    #[error("journal record `{0}` does not match the configured models, tasks or k")]
    Foreign(String),
    #[error("golden synthesis: {0}")]
    Golden(InfraError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

impl CampaignError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CampaignError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn config(path: &Path, message: impl ToString) -> Self {
        CampaignError::Config {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

pub fn render_prompt(template: &str, task: &Task) -> String {
    template
        .replace("{task}", &task.id)
        .replace("{top}", &task.expected_top)
        .replace("{prompt}", &task.prompt)
}

/// Everything a campaign run needs besides the journal location.
pub struct Campaign<'a> {
    pub tasks: &'a [Task],
    pub models: &'a [ModelConfig],
    pub generator: &'a dyn Generator,
    pub backend: &'a dyn Backend,
    pub toolchain: &'a ToolchainConfig,
    pub goldens: &'a GoldenCache,
    pub rules: &'a RuleSet,
    pub weights: WeightConfig,
    pub k: u32,
    pub prompt_template: &'a str,
    pub clock: &'a dyn Clock,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// 0 lets the pool decide; 1 is strictly sequential.
    pub workers: usize,
    /// Stop after this many new records (simulated interruption).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub planned: usize,
    pub skipped: usize,
    pub executed: usize,
    pub infrastructure: usize,
}

struct Job<'a> {
    model: &'a ModelConfig,
    task: &'a Task,
    attempt: u32,
}

impl Campaign<'_> {
    fn record(&self, job: &Job<'_>, started_ms: u64, generation: Option<GenerationRecord>, outcome: AttemptOutcome) -> AttemptRecord {
        AttemptRecord {
            schema: JOURNAL_SCHEMA,
            key: attempt_key(&job.model.id, &job.task.id, job.attempt),
            model: job.model.id.clone(),
            task: job.task.id.clone(),
            attempt: job.attempt,
            generation,
            outcome,
            started_ms,
            finished_ms: self.clock.now_ms(),
        }
    }

    fn evaluate(&self, job: &Job<'_>) -> AttemptRecord {
        let started = self.clock.now_ms();
        let label = attempt_key(&job.model.id, &job.task.id, job.attempt);
        let prompt = render_prompt(self.prompt_template, job.task);
        let infra = |error: InfraError| AttemptOutcome::Infrastructure { error };
        let generation = match self.generator.generate(job.model, job.task, &prompt, job.attempt) {
            Ok(g) => g,
            Err(e) => return self.record(job, started, None, infra(e)),
        };
        let gates = match &generation.extracted {
            Extraction::Failed { reason } => Ok(GateTrace::syntax_failure(reason.clone())),
            Extraction::Code { text } => {
                let design = VerilogSource::new(text.clone(), label.clone());
                run_gates(&design, job.task, self.backend, self.toolchain, &label)
            }
        };
        let gates = match gates {
            Ok(g) => g,
            Err(e) => return self.record(job, started, Some(generation), infra(e)),
        };
        let mut libraries = BTreeMap::new();
        if let (true, Some(top), Extraction::Code { text }) = (gates.passed_all(), &gates.top, &generation.extracted) {
            let alternates: Vec<String> = self.toolchain.all_libraries().into_iter().skip(1).collect();
            let design = VerilogSource::new(text.clone(), label.clone());
            for (lib, outcome) in
                synthesize_all_libraries(&design, top, &alternates, self.backend, self.toolchain.synth_timeout(), &label)
            {
                let o = match outcome {
                    Ok(o) => LibraryOutcome::Synthesized(o),
                    Err(e) => LibraryOutcome::Infrastructure(e),
                };
                libraries.insert(lib, o);
            }
        }
        let hqi = match attempt_hqi(gates.passing_metrics(), self.goldens.default_metrics(&job.task.id), &self.weights) {
            Ok(h) => h,
            Err(e) => return self.record(job, started, Some(generation), infra(InfraError::new("score", e.to_string()))),
        };
        let failure = gates.genuine_synth_failure().and_then(|o| classify_failure(o, self.rules));
        let outcome = AttemptOutcome::Evaluated {
            gates,
            libraries,
            hqi,
            failure,
        };
        self.record(job, started, Some(generation), outcome)
    }
}

/// Runs every (model, task, attempt) not yet settled in the journal. Keys
/// whose latest record is an infrastructure failure are retried.
pub fn run_campaign(c: &Campaign<'_>, journal: &Path, opts: &RunOptions) -> Result<RunStats, CampaignError> {
    let snapshot = read_journal(journal, true)?;
    let mut stats = RunStats::default();
    let mut jobs = Vec::new();
    for model in c.models {
        for task in c.tasks {
            for attempt in 1..=c.k {
                stats.planned += 1;
                if snapshot.is_done(&attempt_key(&model.id, &task.id, attempt)) {
                    stats.skipped += 1;
                } else {
                    jobs.push(Job { model, task, attempt });
                }
            }
        }
    }
    if let Some(n) = opts.stop_after {
        jobs.truncate(n);
    }
    let mut writer = JournalWriter::open(journal)?;
    let (tx, rx) = mpsc::channel::<AttemptRecord>();
    let written = std::thread::scope(|s| {
        let sink = s.spawn(move || -> Result<(usize, usize), CampaignError> {
            let (mut n, mut infra) = (0, 0);
            for rec in rx {
                infra += rec.is_infrastructure() as usize;
                writer.append(&rec)?;
                n += 1;
            }
            Ok((n, infra))
        });
        map_ordered(&jobs, opts.workers, |job| {
            let rec = c.evaluate(job);
            log::debug!("{} done", rec.key);
            // a closed channel means the writer failed; its error is reported below
            let _ = tx.send(rec);
        });
        drop(tx);
        sink.join().expect("journal writer panicked")
    })?;
    stats.executed = written.0;
    stats.infrastructure = written.1;
    Ok(stats)
}

/// Task universe and scoring settings shared by the analysis commands.
pub struct Scope<'a> {
    pub tasks: &'a [Task],
    pub models: &'a [ModelConfig],
    pub goldens: &'a GoldenCache,
    pub weights: WeightConfig,
    pub k: u32,
}

impl Scope<'_> {
    pub fn task_weights(&self) -> BTreeMap<String, f64> {
        self.tasks.iter().map(|t| (t.id.clone(), t.complexity.weight)).collect()
    }

    pub fn golden_set(&self) -> BTreeSet<String> {
        self.goldens.valid_tasks().map(str::to_string).collect()
    }

    pub fn categories(&self) -> BTreeMap<String, String> {
        self.tasks.iter().map(|t| (t.id.clone(), t.category.clone())).collect()
    }

    /// Checks that the journal is final: no pending infrastructure failures,
    /// nothing foreign, and exactly k attempts per (model, task). Returns the
    /// records grouped by model.
    pub fn complete_records<'s>(
        &self,
        snapshot: &'s JournalSnapshot,
    ) -> Result<BTreeMap<String, Vec<&'s AttemptRecord>>, CampaignError> {
        let infra: Vec<_> = snapshot.infrastructure().collect();
        if let Some(first) = infra.first() {
            return Err(CampaignError::Infrastructure {
                count: infra.len(),
                first: first.key.clone(),
            });
        }
        let task_ids: BTreeSet<&str> = self.tasks.iter().map(|t| t.id.as_str()).collect();
        let model_ids: BTreeSet<&str> = self.models.iter().map(|m| m.id.as_str()).collect();
        let mut out: BTreeMap<String, Vec<&AttemptRecord>> = BTreeMap::new();
        for r in snapshot.canonical() {
            if !task_ids.contains(r.task.as_str()) || !model_ids.contains(r.model.as_str()) || r.attempt == 0 || r.attempt > self.k {
                return Err(CampaignError::Foreign(r.key.clone()));
            }
            out.entry(r.model.clone()).or_default().push(r);
        }
        for m in self.models {
            let recs = out.entry(m.id.clone()).or_default();
            for t in self.tasks {
                let count = recs.iter().filter(|r| r.task == t.id).count();
                if count != self.k as usize {
                    return Err(CampaignError::Incomplete {
                        model: m.id.clone(),
                        task: t.id.clone(),
                        count,
                        expected: self.k,
                    });
                }
            }
        }
        Ok(out)
    }

    fn scored(&self, records: &[&AttemptRecord], weights: &WeightConfig) -> Result<Vec<ScoredAttempt>, CampaignError> {
        records
            .iter()
            .map(|r| {
                let gates = r.gates().expect("infrastructure records rejected earlier");
                let hqi = attempt_hqi(gates.passing_metrics(), self.goldens.default_metrics(&r.task), weights)?;
                Ok(ScoredAttempt {
                    task: r.task.clone(),
                    attempt: r.attempt,
                    passed: gates.passed_all(),
                    hqi: hqi.value(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub access_type: AccessType,
    pub summary: ModelSummary,
}

/// Output of `score`: model summaries bound to the journal they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub schema: u32,
    /// SHA-256 of the canonical journal text.
    pub journal_digest: String,
    pub weights: WeightConfig,
    pub k: u32,
    pub models: BTreeMap<String, ScoredModel>,
}

pub fn journal_digest(snapshot: &JournalSnapshot) -> String {
    Sha256::digest(canonical_text(snapshot).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Recomputes HQI for every attempt from its stored metrics and the golden
/// cache, then aggregates per model. Pure: the journal is not touched.
pub fn score_journal(snapshot: &JournalSnapshot, scope: &Scope<'_>) -> Result<ScoreTable, CampaignError> {
    let mut table = ScoreTable {
        schema: 1,
        journal_digest: journal_digest(snapshot),
        weights: scope.weights,
        k: scope.k,
        models: BTreeMap::new(),
    };
    if snapshot.latest.is_empty() {
        log::warn!("journal is empty; nothing to score");
        return Ok(table);
    }
    let grouped = scope.complete_records(snapshot)?;
    let weights = scope.task_weights();
    let golden = scope.golden_set();
    let categories = scope.categories();
    for m in scope.models {
        let records = scope.scored(&grouped[&m.id], &scope.weights)?;
        let mut summary = aggregate_model(&records, &weights, &golden, scope.k)?;
        summary.per_category = per_category_scores(&records, &weights, &golden, &categories, scope.k)?.scores;
        table.models.insert(
            m.id.clone(),
            ScoredModel {
                access_type: m.access_type,
                summary,
            },
        );
    }
    Ok(table)
}

/// Default-library metrics of every attempt, for re-weighting.
pub fn sensitivity_cohort(snapshot: &JournalSnapshot, scope: &Scope<'_>) -> Result<SensitivityCohort, CampaignError> {
    let grouped = scope.complete_records(snapshot)?;
    let models = grouped
        .into_iter()
        .map(|(model, recs)| {
            let attempts = recs
                .iter()
                .map(|r| MetricAttempt {
                    task: r.task.clone(),
                    attempt: r.attempt,
                    metrics: r.gates().and_then(GateTrace::passing_metrics).cloned(),
                })
                .collect();
            (model, attempts)
        })
        .collect();
    let goldens = scope
        .goldens
        .valid_tasks()
        .filter_map(|t| scope.goldens.default_metrics(t).map(|m| (t.to_string(), m.clone())))
        .collect();
    Ok(SensitivityCohort {
        models,
        goldens,
        task_weights: scope.task_weights(),
        k: scope.k,
    })
}

/// Multi-library observations of passing designs plus per-library goldens.
pub fn cross_library_input(
    snapshot: &JournalSnapshot,
    scope: &Scope<'_>,
    default_library: &str,
) -> Result<CrossLibraryInput, CampaignError> {
    let grouped = scope.complete_records(snapshot)?;
    let mut passing = Vec::new();
    for r in grouped.values().flatten() {
        let Some(AttemptOutcome::Evaluated { gates, libraries, .. }) = Some(&r.outcome) else { continue };
        let Some(base) = gates.passing_metrics() else { continue };
        let mut libs = BTreeMap::from([(default_library.to_string(), Some(base.clone()))]);
        for (lib, o) in libraries {
            let m = match o {
                LibraryOutcome::Synthesized(SynthOutcome::Ok { metrics }) => Some(metrics.clone()),
                LibraryOutcome::Synthesized(_) => None,
                LibraryOutcome::Infrastructure(e) => {
                    return Err(CampaignError::Infrastructure {
                        count: 1,
                        first: format!("{} ({lib}: {e})", r.key),
                    })
                }
            };
            libs.insert(lib.clone(), m);
        }
        passing.push(DesignObservation {
            model: r.model.clone(),
            task: r.task.clone(),
            attempt: r.attempt,
            libraries: libs,
        });
    }
    let goldens = scope
        .goldens
        .entries
        .iter()
        .filter_map(|(t, e)| match e {
            GoldenEntry::Valid { libraries, .. } => Some((t.clone(), libraries.clone())),
            _ => None,
        })
        .collect();
    Ok(CrossLibraryInput {
        default_library: default_library.to_string(),
        models: scope.models.iter().map(|m| m.id.clone()).collect(),
        passing,
        goldens,
        task_weights: scope.task_weights(),
        k: scope.k,
        weights: scope.weights,
    })
}

/// Genuine synthesis failures with provenance. With `rules`, failures are
/// re-classified; otherwise the tags stored at run time are used.
pub fn journal_failures(snapshot: &JournalSnapshot, scope: &Scope<'_>, rules: Option<&RuleSet>) -> Vec<TaggedFailure> {
    let tasks: BTreeMap<&str, &Task> = scope.tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let models: BTreeMap<&str, &ModelConfig> = scope.models.iter().map(|m| (m.id.as_str(), m)).collect();
    let mut out = Vec::new();
    for r in snapshot.canonical() {
        let AttemptOutcome::Evaluated { gates, failure, .. } = &r.outcome else { continue };
        let (Some(task), Some(model)) = (tasks.get(r.task.as_str()), models.get(r.model.as_str())) else {
            continue;
        };
        let tag = match rules {
            Some(rules) => gates.genuine_synth_failure().and_then(|o| classify_failure(o, rules)),
            None => failure.clone(),
        };
        if let Some(tag) = tag {
            out.push(TaggedFailure {
                model: r.model.clone(),
                task: r.task.clone(),
                attempt: r.attempt,
                benchmark: task.benchmark,
                access_type: model.access_type,
                tag,
            });
        }
    }
    out
}
