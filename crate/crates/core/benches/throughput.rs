// SPDX-License-Identifier: Apache-2.0

//! Campaign and sensitivity throughput at one worker vs. a full pool.
//!
//! The mock backend answers instantly, so a fixed per-call delay stands in
//! for tool latency; otherwise the bench only measures journal I/O.

use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rtleval_core::campaign::{
    compute_golden_metrics, load_manifest, run_campaign, Campaign, FrozenClock, HarnessConfig, PregenDir, RunOptions,
};
use rtleval_core::frontend::VerilogSource;
use rtleval_core::scoring::{
    default_sensitivity_configs, weight_sensitivity_with, MetricAttempt, SensitivityCohort,
};
use rtleval_core::taxonomy::RuleSet;
use rtleval_core::toolchain::{
    Backend, InfraError, Invocation, MockBackend, SimTranscript, SynthMetrics, SynthOutcome, SyntaxOutcome,
};

const TOOL_LATENCY: Duration = Duration::from_micros(500);

struct SlowBackend(MockBackend);

impl Backend for SlowBackend {
    fn check_syntax(&self, ctx: Invocation<'_>, design: &VerilogSource) -> Result<SyntaxOutcome, InfraError> {
        std::thread::sleep(TOOL_LATENCY);
        self.0.check_syntax(ctx, design)
    }

    fn synthesize(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        top: &str,
        library: &str,
        timeout: Duration,
    ) -> Result<SynthOutcome, InfraError> {
        std::thread::sleep(TOOL_LATENCY);
        self.0.synthesize(ctx, design, top, library, timeout)
    }

    fn simulate(
        &self,
        ctx: Invocation<'_>,
        design: &VerilogSource,
        testbench: &str,
        timeout: Duration,
    ) -> Result<SimTranscript, InfraError> {
        std::thread::sleep(TOOL_LATENCY);
        self.0.simulate(ctx, design, testbench, timeout)
    }
}

fn pool_sizes() -> [usize; 2] {
    [1, std::thread::available_parallelism().map_or(4, |n| n.get()).max(2)]
}

fn campaign(c: &mut Criterion) {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo");
    let cfg = HarnessConfig::load(&demo.join("harness.toml")).unwrap();
    let tasks = load_manifest(&cfg.manifest).unwrap();
    let backend = SlowBackend(MockBackend::from_file(cfg.mock_tables.as_ref().unwrap()).unwrap());
    let goldens = compute_golden_metrics(&tasks, &backend, &cfg.toolchain, 0).unwrap();
    let rules = RuleSet::builtin();
    let pregen = PregenDir::new(cfg.pregen_dir.clone().unwrap());
    let clock = FrozenClock(0);
    let camp = Campaign {
        tasks: &tasks,
        models: &cfg.models,
        generator: &pregen,
        backend: &backend,
        toolchain: &cfg.toolchain,
        goldens: &goldens,
        rules: &rules,
        weights: cfg.weights(),
        k: cfg.k,
        prompt_template: &cfg.prompt_template,
        clock: &clock,
    };
    let dir = tempfile::tempdir().unwrap();

    let mut g = c.benchmark_group("demo_campaign");
    g.sample_size(10);
    for workers in pool_sizes() {
        g.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &workers| {
            let journal = dir.path().join(format!("j{workers}.jsonl"));
            b.iter(|| {
                let _ = std::fs::remove_file(&journal);
                run_campaign(&camp, &journal, &RunOptions { workers, stop_after: None }).unwrap()
            })
        });
    }
    g.finish();
}

/// 24 models over 200 tasks, k = 5, metrics spread deterministically.
fn synthetic_cohort() -> SensitivityCohort {
    let mut c = SensitivityCohort {
        k: 5,
        ..Default::default()
    };
    let metrics = |area: f64, delay: f64, warnings: u64| SynthMetrics {
        area,
        delay,
        warnings,
        library_id: "lib".into(),
    };
    for t in 0..200u32 {
        let task = format!("t{t:03}");
        c.goldens.insert(task.clone(), metrics(50.0 + t as f64, 1.0 + (t % 7) as f64, (t % 3) as u64));
        c.task_weights.insert(task, 1.0 + (t % 24) as f64);
    }
    for mi in 0..24u32 {
        let mut attempts = Vec::new();
        for (ti, (task, g)) in c.goldens.iter().enumerate() {
            for a in 1..=5u32 {
                let h = (mi * 7919 + ti as u32 * 104_729 + a * 1_299_709) % 1000;
                let m = (h % 5 != 0).then(|| {
                    metrics(
                        g.area * (0.8 + h as f64 / 700.0),
                        g.delay * (0.9 + (h % 97) as f64 / 90.0),
                        g.warnings + (h % 4) as u64,
                    )
                });
                attempts.push(MetricAttempt {
                    task: task.clone(),
                    attempt: a,
                    metrics: m,
                });
            }
        }
        c.models.insert(format!("m{mi:02}"), attempts);
    }
    c
}

fn sensitivity(c: &mut Criterion) {
    let cohort = synthetic_cohort();
    let configs = default_sensitivity_configs();
    let mut g = c.benchmark_group("sensitivity_sweep");
    for workers in pool_sizes() {
        g.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &workers| {
            b.iter(|| weight_sensitivity_with(&cohort, &configs, workers).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, campaign, sensitivity);
criterion_main!(benches);
