use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use trajprune_core::metrics::{ensemble_average, score_dataset_with, sidecar_path, write_table};
use trajprune_core::store::{open_log, validate as validate_log};
use trajprune_core::Metric;

use super::{beside, creation_time, Ctx, Record, SelectorArgs};
use crate::exit::usage;

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Trajectory log to score.
    #[arg(long, required_unless_present = "ensemble", conflicts_with = "ensemble")]
    pub log: Option<PathBuf>,
    /// Comma-separated logs of independent runs; their scores are averaged.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ensemble: Vec<PathBuf>,
    /// entropy, aum, forgetting, el2n or mal.
    #[arg(long)]
    pub metric: Metric,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Score table CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn score(a: &ScoreArgs, ctx: &Ctx) -> Result<Record> {
    let paths: Vec<PathBuf> = match &a.log {
        Some(p) => vec![p.clone()],
        None => a.ensemble.clone(),
    };
    let mut tables = Vec::with_capacity(paths.len());
    let mut selector = None;
    for path in &paths {
        let log = open_log(path).with_context(|| format!("opening {}", path.display()))?;
        let sel = a.selector.resolve(a.metric, log.n_epochs)?;
        if let Some(prev) = &selector {
            if prev != &sel {
                return Err(usage(format!(
                    "ensemble logs resolve to different selectors ({prev} vs {sel}); pass one explicitly"
                )));
            }
        }
        tables.push(score_dataset_with(&log, a.metric, &sel, ctx.exec)?);
        selector = Some(sel);
    }
    let table = if tables.len() == 1 {
        tables.pop().expect("one table")
    } else {
        ensemble_average(&tables)?
    };

    let source: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    write_table(&table, &a.out, Some(&source.join(",")), creation_time()?)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "scored {} samples by {} ({}) over {} log(s); table written to {}",
        table.len(),
        a.metric,
        table.selector,
        paths.len(),
        a.out.display()
    );
    Ok(Record {
        config: json!({
            "logs": paths,
            "metric": a.metric.name(),
            "selector": table.selector.to_string(),
            "out": a.out,
        }),
        inputs: paths,
        outputs: vec![a.out.clone(), sidecar_path(&a.out)],
        manifest_path: Some(beside(&a.out)),
    })
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub log: PathBuf,
}

pub fn validate(a: &ValidateArgs, _ctx: &Ctx) -> Result<Record> {
    let log = open_log(&a.log).map_err(|e| usage(format!("{}: invalid trajectory log: {e}", a.log.display())))?;
    let report = validate_log(&log);
    if !report.ok {
        return Err(usage(format!("{}: {report}", a.log.display())));
    }
    println!(
        "{}: ok ({} samples, {} classes, {} epochs, run seed {})",
        a.log.display(),
        log.n_samples(),
        log.n_classes,
        log.n_epochs,
        log.run_seed
    );
    Ok(Record {
        config: json!({ "log": a.log }),
        inputs: vec![a.log.clone()],
        outputs: vec![],
        manifest_path: None,
    })
}
