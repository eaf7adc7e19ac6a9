// SPDX-License-Identifier: Apache-2.0

//! `rtleval`: run, score and report LLM RTL-generation campaigns.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 incomplete
//! journal, 3 infrastructure failure present.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtleval_core::campaign::CampaignError;
use rtleval_core::taxonomy::GroupBy;
use rtleval_core::toolchain::InfraError;

#[derive(Debug, Parser)]
#[command(name = "rtleval", version, about = "Synthesis-in-the-loop evaluation of generated RTL")]
pub struct Cli {
    /// Harness configuration file.
    #[arg(long, global = true, default_value = "harness.toml")]
    pub config: PathBuf,
    /// Journal path; overrides the configured one.
    #[arg(long, global = true)]
    pub journal: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide, 1 runs sequentially.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Keep per-invocation scratch directories of external tools.
    #[arg(long, global = true)]
    pub keep_artifacts: bool,
    /// Use the table-driven mock backend and a frozen clock.
    #[arg(long, global = true)]
    pub mock: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and evaluate every pending (model, task, attempt).
    Run {
        /// Stop after this many new records.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Synthesize golden designs and write the golden cache.
    Golden,
    /// Score a complete journal and write `<journal>.scores.json`.
    Score,
    /// Re-classify synthesis failures and write `<journal>.tags.json`.
    Classify {
        /// Rule file replacing the configured or built-in rules.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Render reports from a scored or classified journal.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
    /// Re-rank models under alternative HQI weightings.
    Sensitivity {
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rank agreement between the default and alternate libraries.
    Xlib {
        /// Libraries to compare; defaults to the configured alternates.
        #[arg(long = "library")]
        libraries: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReportKind {
    Leaderboard {
        #[command(flatten)]
        out: OutputArgs,
        #[command(flatten)]
        tiers: TierArgs,
    },
    Heatmap {
        /// Write `heatmap_best_of_k.csv` and `heatmap_per_attempt.csv` here
        /// instead of printing both.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        tiers: TierArgs,
    },
    Failures {
        #[arg(long, default_value = "model")]
        group_by: GroupBy,
        #[command(flatten)]
        out: OutputArgs,
    },
    Inference {
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Emit CSV instead of aligned text.
    #[arg(long)]
    pub csv: bool,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TierArgs {
    #[arg(long)]
    pub tier1_min: Option<f64>,
    #[arg(long)]
    pub tier3_below: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<CampaignError>() {
            return match c {
                CampaignError::Incomplete { .. } | CampaignError::Foreign(_) => 2,
                CampaignError::Infrastructure { .. } | CampaignError::Golden(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<InfraError>().is_some() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
