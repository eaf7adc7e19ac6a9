// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use rtleval_core::campaign::{
    compute_golden_metrics, cross_library_input, journal_failures, load_manifest, read_journal, run_campaign,
    score_journal, sensitivity_cohort, summarize_inference, journal_digest, Campaign, CampaignError, ChatEndpoint,
    Clock, FrozenClock, Generator, GoldenCache, GoldenEntry, HarnessConfig, JournalSnapshot, PregenDir, RunOptions,
    ScoreTable, Scope, SystemClock, ThreadSleeper,
};
use rtleval_core::report;
use rtleval_core::robustness::cross_library_report;
use rtleval_core::scoring::{default_sensitivity_configs, weight_sensitivity_with};
use rtleval_core::task::Task;
use rtleval_core::taxonomy::{taxonomy_breakdown, GroupBy, RuleSet, TaggedFailure};
use rtleval_core::toolchain::{Backend, ExternalTools, MockBackend};

use crate::{Cli, Command, OutputArgs, ReportKind, TierArgs};

/// Score table written by `score`, next to the journal.
pub fn scores_path(journal: &Path) -> PathBuf {
    journal.with_extension("scores.json")
}

/// Tags written by `classify`, next to the journal.
pub fn tags_path(journal: &Path) -> PathBuf {
    journal.with_extension("tags.json")
}

struct Ctx {
    cfg: HarnessConfig,
    journal: PathBuf,
    workers: usize,
    keep_artifacts: bool,
    mock: bool,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self> {
        let cfg = HarnessConfig::load(&cli.config)?;
        Ok(Self {
            journal: cli.journal.clone().unwrap_or_else(|| cfg.journal.clone()),
            workers: cli.workers.unwrap_or(cfg.workers),
            keep_artifacts: cli.keep_artifacts,
            mock: cli.mock,
            cfg,
        })
    }

    fn tasks(&self) -> Result<Vec<Task>> {
        Ok(load_manifest(&self.cfg.manifest)?)
    }

    fn backend(&self) -> Result<Box<dyn Backend>> {
        if self.mock {
            let path = self
                .cfg
                .mock_tables
                .as_ref()
                .ok_or_else(|| anyhow!("--mock needs `mock_tables` in the config"))?;
            // a broken table file is a configuration problem, not infrastructure
            return MockBackend::from_file(path)
                .map(|b| Box::new(b) as Box<dyn Backend>)
                .map_err(|e| anyhow!("{e}"));
        }
        let tools = self
            .cfg
            .tools
            .clone()
            .ok_or_else(|| anyhow!("no [tools] section in the config; pass --mock to use the mock backend"))?;
        Ok(Box::new(ExternalTools::new(tools, self.keep_artifacts)?))
    }

    fn goldens(&self) -> Result<GoldenCache> {
        let path = &self.cfg.golden_cache;
        if !path.exists() {
            bail!("golden cache {} not found; run `rtleval golden` first", path.display());
        }
        let cache = GoldenCache::load(path)?;
        if cache.default_library != self.cfg.toolchain.default_library {
            bail!(
                "golden cache {} was built for library `{}`, config uses `{}`; rerun `rtleval golden`",
                path.display(),
                cache.default_library,
                self.cfg.toolchain.default_library
            );
        }
        Ok(cache)
    }

    fn rules(&self, path: Option<&Path>) -> Result<RuleSet> {
        Ok(match path.or(self.cfg.rules.as_deref()) {
            Some(p) => RuleSet::from_file(p)?,
            None => RuleSet::builtin(),
        })
    }

    fn snapshot(&self) -> Result<JournalSnapshot> {
        Ok(read_journal(&self.journal, false)?)
    }

    fn scope<'a>(&'a self, tasks: &'a [Task], goldens: &'a GoldenCache) -> Scope<'a> {
        Scope {
            tasks,
            models: &self.cfg.models,
            goldens,
            weights: self.cfg.weights(),
            k: self.cfg.k,
        }
    }

    fn apply_tiers(&mut self, t: &TierArgs) -> Result<()> {
        if let Some(v) = t.tier1_min {
            self.cfg.tiers.tier1_min = v;
        }
        if let Some(v) = t.tier3_below {
            self.cfg.tiers.tier3_below = v;
        }
        if self.cfg.tiers.tier3_below > self.cfg.tiers.tier1_min {
            bail!("tier thresholds overlap");
        }
        Ok(())
    }

    /// The score table for the current journal; refuses stale tables.
    fn score_table(&self) -> Result<ScoreTable> {
        let path = scores_path(&self.journal);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                bail!("journal {} has not been scored; run `rtleval score` first", self.journal.display())
            }
            Err(e) => return Err(e).with_context(|| path.display().to_string()),
        };
        let table: ScoreTable =
            serde_json::from_str(&text).with_context(|| format!("{}: malformed score table", path.display()))?;
        if table.journal_digest != journal_digest(&self.snapshot()?) {
            bail!("{} is stale (journal changed since scoring); rerun `rtleval score`", path.display());
        }
        Ok(table)
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => fs::write(p, text).with_context(|| p.display().to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let mut ctx = Ctx::load(cli)?;
    match &cli.command {
        Command::Run { stop_after } => run(&ctx, *stop_after),
        Command::Golden => golden(&ctx),
        Command::Score => score(&ctx),
        Command::Classify { rules } => classify(&ctx, rules.as_deref()),
        Command::Report { kind } => {
            match kind {
                ReportKind::Leaderboard { out, tiers } => {
                    ctx.apply_tiers(tiers)?;
                    let rows = report::leaderboard(&ctx.score_table()?, &ctx.cfg.tiers);
                    let text = if out.csv {
                        report::leaderboard_csv(&rows)
                    } else {
                        report::leaderboard_text(&rows)
                    };
                    emit(out, &text)?;
                }
                ReportKind::Heatmap { out_dir, tiers } => {
                    ctx.apply_tiers(tiers)?;
                    let h = report::heatmap(&ctx.score_table()?, &ctx.cfg.tiers);
                    match out_dir {
                        Some(dir) => {
                            fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
                            for (name, text) in [
                                ("heatmap_best_of_k.csv", h.best_of_k_csv()),
                                ("heatmap_per_attempt.csv", h.per_attempt_csv()),
                            ] {
                                let p = dir.join(name);
                                fs::write(&p, text).with_context(|| p.display().to_string())?;
                            }
                        }
                        None => print!("# best_of_k\n{}\n# per_attempt\n{}", h.best_of_k_csv(), h.per_attempt_csv()),
                    }
                }
                ReportKind::Failures { group_by, out } => failures(&ctx, *group_by, out)?,
                ReportKind::Inference { out } => {
                    let snap = ctx.snapshot()?;
                    let s = summarize_inference(snap.canonical());
                    let text = if out.csv {
                        report::inference_csv(&s)
                    } else {
                        report::inference_text(&s)
                    };
                    emit(out, &text)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sensitivity { out } => sensitivity(&ctx, out),
        Command::Xlib { libraries, out } => xlib(&ctx, libraries, out),
    }
}

fn run(ctx: &Ctx, stop_after: Option<usize>) -> Result<ExitCode> {
    let tasks = ctx.tasks()?;
    let goldens = ctx.goldens()?;
    let backend = ctx.backend()?;
    let rules = ctx.rules(None)?;
    let generator: Box<dyn Generator> = match &ctx.cfg.pregen_dir {
        Some(dir) => Box::new(PregenDir::new(dir)),
        None => {
            if let Some(m) = ctx.cfg.models.iter().find(|m| m.endpoint.is_none()) {
                bail!("model `{}` has no endpoint and no pregen_dir is configured", m.id);
            }
            Box::new(ChatEndpoint::new(Box::new(ThreadSleeper)))
        }
    };
    let clock: Box<dyn Clock> = if ctx.mock {
        Box::new(FrozenClock(0))
    } else {
        Box::new(SystemClock)
    };
    let campaign = Campaign {
        tasks: &tasks,
        models: &ctx.cfg.models,
        generator: generator.as_ref(),
        backend: backend.as_ref(),
        toolchain: &ctx.cfg.toolchain,
        goldens: &goldens,
        rules: &rules,
        weights: ctx.cfg.weights(),
        k: ctx.cfg.k,
        prompt_template: &ctx.cfg.prompt_template,
        clock: clock.as_ref(),
    };
    let opts = RunOptions {
        workers: ctx.workers,
        stop_after,
    };
    let stats = run_campaign(&campaign, &ctx.journal, &opts)?;
    eprintln!(
        "planned {}, already journaled {}, evaluated {}, infrastructure failures {}",
        stats.planned, stats.skipped, stats.executed, stats.infrastructure
    );
    let pending = ctx.snapshot()?.infrastructure().count();
    if pending > 0 {
        eprintln!("error: {pending} attempt(s) ended in infrastructure failure; rerun `rtleval run` to retry");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn golden(ctx: &Ctx) -> Result<ExitCode> {
    let tasks = ctx.tasks()?;
    let backend = ctx.backend()?;
    let cache =
        compute_golden_metrics(&tasks, backend.as_ref(), &ctx.cfg.toolchain, ctx.workers).map_err(CampaignError::Golden)?;
    cache.save(&ctx.cfg.golden_cache)?;
    let (mut valid, mut invalid, mut absent) = (0, 0, 0);
    for (task, e) in &cache.entries {
        match e {
            GoldenEntry::Valid { .. } => valid += 1,
            GoldenEntry::Invalid { stage, reason } => {
                invalid += 1;
                eprintln!("warning: golden for `{task}` failed at {stage}: {reason}");
            }
            GoldenEntry::Absent => absent += 1,
        }
    }
    eprintln!(
        "wrote {}: {valid} valid, {invalid} invalid, {absent} absent",
        ctx.cfg.golden_cache.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn score(ctx: &Ctx) -> Result<ExitCode> {
    let tasks = ctx.tasks()?;
    let goldens = ctx.goldens()?;
    let snap = ctx.snapshot()?;
    if snap.latest.is_empty() {
        eprintln!("warning: journal {} is empty", ctx.journal.display());
    }
    let table = score_journal(&snap, &ctx.scope(&tasks, &goldens))?;
    let path = scores_path(&ctx.journal);
    let json = serde_json::to_string_pretty(&table)? + "\n";
    fs::write(&path, json).with_context(|| path.display().to_string())?;
    print!("{}", report::leaderboard_text(&report::leaderboard(&table, &ctx.cfg.tiers)));
    Ok(ExitCode::SUCCESS)
}

fn classify(ctx: &Ctx, rules: Option<&Path>) -> Result<ExitCode> {
    let tasks = ctx.tasks()?;
    let rules = ctx.rules(rules)?;
    let snap = ctx.snapshot()?;
    // goldens play no part in classification
    let goldens = GoldenCache {
        schema: 1,
        default_library: ctx.cfg.toolchain.default_library.clone(),
        entries: Default::default(),
    };
    let tags = journal_failures(&snap, &ctx.scope(&tasks, &goldens), Some(&rules));
    let path = tags_path(&ctx.journal);
    fs::write(&path, serde_json::to_string_pretty(&tags)? + "\n").with_context(|| path.display().to_string())?;
    print!("{}", report::failure_text(&taxonomy_breakdown(&tags, GroupBy::Subtype), &tags));
    Ok(ExitCode::SUCCESS)
}

fn failures(ctx: &Ctx, group_by: GroupBy, out: &OutputArgs) -> Result<()> {
    let path = tags_path(&ctx.journal);
    let tags: Vec<TaggedFailure> = if path.exists() {
        let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
        serde_json::from_str(&text).with_context(|| format!("{}: malformed tag file", path.display()))?
    } else {
        let tasks = ctx.tasks()?;
        let goldens = GoldenCache {
            schema: 1,
            default_library: ctx.cfg.toolchain.default_library.clone(),
            entries: Default::default(),
        };
        journal_failures(&ctx.snapshot()?, &ctx.scope(&tasks, &goldens), None)
    };
    let b = taxonomy_breakdown(&tags, group_by);
    let text = if out.csv {
        report::failure_csv(&b)
    } else {
        report::failure_text(&b, &tags)
    };
    emit(out, &text)
}

fn sensitivity(ctx: &Ctx, out: &OutputArgs) -> Result<ExitCode> {
    let tasks = ctx.tasks()?;
    let goldens = ctx.goldens()?;
    let cohort = sensitivity_cohort(&ctx.snapshot()?, &ctx.scope(&tasks, &goldens))?;
    let configs = ctx.cfg.sensitivity_configs.clone().unwrap_or_else(default_sensitivity_configs);
    let r = weight_sensitivity_with(&cohort, &configs, ctx.workers)?;
    let text = if out.csv {
        report::sensitivity_csv(&r)
    } else {
        report::sensitivity_text(&r)
    };
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn xlib(ctx: &Ctx, libraries: &[String], out: &OutputArgs) -> Result<ExitCode> {
    let libs: Vec<String> = if libraries.is_empty() {
        ctx.cfg.toolchain.alternate_libraries.clone()
    } else {
        libraries.to_vec()
    };
    if libs.is_empty() {
        bail!("no alternate libraries configured; pass --library");
    }
    let tasks = ctx.tasks()?;
    let goldens = ctx.goldens()?;
    let input = cross_library_input(
        &ctx.snapshot()?,
        &ctx.scope(&tasks, &goldens),
        &ctx.cfg.toolchain.default_library,
    )?;
    let rows = cross_library_report(&input, &libs)?;
    let text = if out.csv {
        report::xlib_csv(&rows)
    } else {
        report::xlib_text(&rows)
    };
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}
