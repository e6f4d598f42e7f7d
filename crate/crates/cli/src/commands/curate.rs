use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use trajprune_core::manifest::{read_manifest, write_manifest};
use trajprune_core::metrics::{read_table, sidecar_path};
use trajprune_core::prune::{
    apply_plan as apply, make_prune_plan, random_prune_plan, rank_samples_with, read_prune_plan, write_prune_plan,
};
use trajprune_core::purify::{purify_pipeline, read_plan, summary_path, write_plan, DEFAULT_DELTA};
use trajprune_core::store::open_log;
use trajprune_core::PurifyConfig;

use super::{beside, Ctx, Record};
use crate::exit::usage;

#[derive(Args, Debug)]
pub struct PurifyArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Entropy score table (with soft labels) computed from `--log`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Outlier threshold on the largest soft-label probability.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Share of samples removed in total (outliers plus easy samples).
    #[arg(long, default_value_t = 0.0)]
    pub prune_rate: f64,
    /// Skip label correction.
    #[arg(long)]
    pub no_correct: bool,
    /// Skip outlier removal.
    #[arg(long)]
    pub no_outliers: bool,
    /// Plan CSV; a JSON summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn purify(a: &PurifyArgs, _ctx: &Ctx) -> Result<Record> {
    let cfg = PurifyConfig {
        delta: a.delta,
        prune_rate: a.prune_rate,
        enable_correction: !a.no_correct,
        enable_outlier_removal: !a.no_outliers,
    };
    cfg.validate()?;
    let log = open_log(&a.log).with_context(|| format!("opening {}", a.log.display()))?;
    let (table, _) = read_table(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    let plan = purify_pipeline(&log, &table, &cfg)?;
    write_plan(&plan, &a.out).with_context(|| format!("writing {}", a.out.display()))?;

    let c = &plan.counts;
    println!(
        "{} samples: {} outliers, {} relabeled, {} easy pruned (budget {}{}); plan written to {}",
        c.n_samples,
        c.n_outliers,
        c.n_corrected,
        c.n_pruned_easy,
        c.budget,
        if c.budget_exceeded { ", exceeded by outliers" } else { "" },
        a.out.display()
    );
    Ok(Record {
        config: json!({
            "log": a.log,
            "scores": a.scores,
            "delta": cfg.delta,
            "prune_rate": cfg.prune_rate,
            "correct": cfg.enable_correction,
            "outliers": cfg.enable_outlier_removal,
            "selector": plan.selector.to_string(),
            "out": a.out,
        }),
        inputs: vec![a.log.clone(), a.scores.clone(), sidecar_path(&a.scores)],
        outputs: vec![a.out.clone(), summary_path(&a.out)],
        manifest_path: Some(beside(&a.out)),
    })
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Score table; lowest scores are removed first.
    #[arg(long)]
    pub scores: PathBuf,
    /// Share of samples to remove, in [0, 1).
    #[arg(long)]
    pub rate: f64,
    /// Remove a seeded uniform subset instead of the lowest-scored samples.
    #[arg(long, value_name = "SEED")]
    pub random: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn prune(a: &PruneArgs, ctx: &Ctx) -> Result<Record> {
    let (table, _) = read_table(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    let plan = match a.random {
        Some(seed) => random_prune_plan(&table.sample_ids, a.rate, seed)?,
        None => make_prune_plan(&rank_samples_with(&table, ctx.exec)?, a.rate)?,
    };
    write_prune_plan(&plan, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "removing {} of {} samples ({}); plan written to {}",
        plan.removed.len(),
        table.len(),
        match a.random {
            Some(seed) => format!("random, seed {seed}"),
            None => format!("lowest {}", table.metric),
        },
        a.out.display()
    );
    Ok(Record {
        config: json!({
            "scores": a.scores,
            "rate": a.rate,
            "random_seed": a.random,
            "metric": table.metric.name(),
            "out": a.out,
        }),
        inputs: vec![a.scores.clone(), sidecar_path(&a.scores)],
        outputs: vec![a.out.clone()],
        manifest_path: Some(beside(&a.out)),
    })
}

#[derive(Args, Debug)]
pub struct ApplyPlanArgs {
    /// Manifest (JSONL) to rewrite.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Plan from `purify` or `prune`.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn header_of(path: &Path) -> Result<String> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

pub fn apply_plan(a: &ApplyPlanArgs, _ctx: &Ctx) -> Result<Record> {
    let manifest = read_manifest(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let header = header_of(&a.plan)?;
    let mut inputs = vec![a.manifest.clone(), a.plan.clone()];
    let (out, kind) = if header.starts_with("sample_id,verdict") {
        inputs.push(summary_path(&a.plan));
        let plan = read_plan(&a.plan).with_context(|| format!("reading {}", a.plan.display()))?;
        (apply(&manifest, &plan)?, "purify")
    } else if header == "sample_id,action" {
        let plan = read_prune_plan(&a.plan).with_context(|| format!("reading {}", a.plan.display()))?;
        (apply(&manifest, &plan)?, "prune")
    } else {
        return Err(usage(format!("{} is neither a purify nor a prune plan", a.plan.display())));
    };
    write_manifest(&out, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let relabeled = out.entries.iter().filter(|e| e.corrected == Some(true)).count();
    println!(
        "{} -> {} samples ({} relabeled); manifest written to {}",
        manifest.len(),
        out.len(),
        relabeled,
        a.out.display()
    );
    Ok(Record {
        config: json!({
            "manifest": a.manifest,
            "plan": a.plan,
            "plan_kind": kind,
            "out": a.out,
        }),
        inputs,
        outputs: vec![a.out.clone()],
        manifest_path: Some(beside(&a.out)),
    })
}
