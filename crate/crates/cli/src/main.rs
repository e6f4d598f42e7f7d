//! `trajprune`: score training samples by their logit trajectories, purify
//! labels, prune datasets and compare pruning strategies.

mod commands;
mod exit;
mod run_manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};
use trajprune_core::Execution;

use commands::{Ctx, Record};
use exit::usage;
use run_manifest::{digests, emit, unix_now, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "trajprune", version, about, propagate_version = true)]
struct Cli {
    /// Run every data-parallel stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true, value_name = "PATH")]
    run_manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded Gaussian-mixture dataset, optionally with label noise.
    Synth(commands::SynthArgs),
    /// Train the reference classifier and record per-epoch logits.
    Train(commands::TrainArgs),
    /// Score every sample of one or more trajectory logs.
    Score(commands::ScoreArgs),
    /// Plan outlier removal, label correction and easy-sample pruning.
    Purify(commands::PurifyArgs),
    /// Plan removal of the lowest-scored (or random) samples.
    Prune(commands::PruneArgs),
    /// Rewrite a manifest according to a purify or prune plan.
    ApplyPlan(commands::ApplyPlanArgs),
    /// Retrain on pruned subsets and report held-out accuracy.
    Compare(commands::CompareArgs),
    /// Summarize a plan and/or score table.
    Report(commands::ReportArgs),
    /// Check a trajectory log for format and invariant violations.
    Validate(commands::ValidateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Score(_) => "score",
            Command::Purify(_) => "purify",
            Command::Prune(_) => "prune",
            Command::ApplyPlan(_) => "apply-plan",
            Command::Compare(_) => "compare",
            Command::Report(_) => "report",
            Command::Validate(_) => "validate",
        }
    }

    fn run(&self, ctx: &Ctx) -> Result<Record> {
        match self {
            Command::Synth(a) => commands::synth(a, ctx),
            Command::Train(a) => commands::train(a, ctx),
            Command::Score(a) => commands::score(a, ctx),
            Command::Purify(a) => commands::purify(a, ctx),
            Command::Prune(a) => commands::prune(a, ctx),
            Command::ApplyPlan(a) => commands::apply_plan(a, ctx),
            Command::Compare(a) => commands::compare(a, ctx),
            Command::Report(a) => commands::report(a, ctx),
            Command::Validate(a) => commands::validate(a, ctx),
        }
    }
}

/// Applies `TRAJPRUNE_THREADS` and returns the worker count in effect.
fn configure_threads() -> Result<usize> {
    let cap = match std::env::var("TRAJPRUNE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => return Err(usage(format!("TRAJPRUNE_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = cap {
            // Fails only if a global pool already exists, which never happens
            // before this point.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cap;
        Ok(1)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started_unix = unix_now();
    let start = Instant::now();
    let threads = configure_threads()?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let threads = if exec.is_parallel() { threads } else { 1 };

    let record = cli.command.run(&Ctx { exec })?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        config: record.config,
        inputs: digests(&record.inputs)?,
        outputs: digests(&record.outputs)?,
        threads,
        started_unix,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    emit(&manifest, cli.run_manifest.as_deref().or(record.manifest_path.as_deref()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::exit_code(&e))
        }
    }
}
