use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use trajprune_core::experiment::{held_out, run_compare, CompareConfig, PruneMethod};
use trajprune_core::trainer::{read_dataset, DatasetFiles, TrainConfig};

use super::{beside, Ctx, Record, SelectorArgs};
use crate::exit::usage;

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Training dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out dataset directory; defaults to a fresh draw from the
    /// training set's generator with clean labels.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Pruning methods: metric names and/or `random`. The unpruned `none`
    /// baseline is always included.
    #[arg(long, value_delimiter = ',', default_value = "entropy,random")]
    pub metrics: Vec<PruneMethod>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
    pub rates: Vec<f64>,
    /// Retraining seeds 0..N per cell.
    #[arg(long, default_value_t = 4)]
    pub seeds: u64,
    /// Epochs for both the scoring run and each retraining run.
    #[arg(long = "train-epochs", default_value_t = 12)]
    pub train_epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Seed of the run whose trajectory is scored.
    #[arg(long, default_value_t = 0)]
    pub score_seed: u64,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Aggregated CSV: rate,metric,mean,std,n.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-cell CSV: metric,rate,seed,n_kept,accuracy.
    #[arg(long)]
    pub cells: Option<PathBuf>,
}

pub fn compare(a: &CompareArgs, ctx: &Ctx) -> Result<Record> {
    if a.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let (train, spec, _) = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mut inputs: Vec<PathBuf> = DatasetFiles::in_dir(&a.data).all().iter().map(|p| p.to_path_buf()).collect();
    let test = match &a.test {
        Some(dir) => {
            inputs.extend(DatasetFiles::in_dir(dir).all().iter().map(|p| p.to_path_buf()));
            read_dataset(dir).with_context(|| format!("reading {}", dir.display()))?.0
        }
        None => held_out(&spec)?,
    };
    let base = TrainConfig {
        epochs: a.train_epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        ..TrainConfig::default()
    };
    let cfg = CompareConfig {
        methods: a.metrics.clone(),
        rates: a.rates.clone(),
        seeds: (0..a.seeds).collect(),
        score_run: TrainConfig {
            seed: a.score_seed,
            ..base
        },
        retrain: base,
        selector: a.selector.given(),
    };
    let report = run_compare(&train, &test, &cfg, ctx.exec)?;
    report.save_csv(&a.out).with_context(|| format!("writing {}", a.out.display()))?;

    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.cells {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?,
        );
        writeln!(f, "metric,rate,seed,n_kept,accuracy")?;
        for c in &report.cells {
            writeln!(f, "{},{},{},{},{}", c.method, c.rate, c.seed, c.n_kept, c.accuracy)?;
        }
        f.flush()?;
        outputs.push(path.clone());
    }

    println!("{:>6}  {:<16} {:>8} {:>8} {:>3}", "rate", "metric", "mean", "std", "n");
    for r in &report.rows {
        println!("{:>6}  {:<16} {:>8.4} {:>8.4} {:>3}", r.rate, r.method.to_string(), r.mean, r.std, r.n);
    }
    Ok(Record {
        config: json!({
            "data": a.data,
            "test": a.test,
            "metrics": a.metrics.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            "rates": a.rates,
            "seeds": cfg.seeds,
            "train_epochs": a.train_epochs,
            "batch": a.batch,
            "lr": a.lr,
            "score_seed": a.score_seed,
            "selector": cfg.selector.as_ref().map(|s| s.to_string()),
            "out": a.out,
            "cells": a.cells,
        }),
        inputs,
        outputs,
        manifest_path: Some(beside(&a.out)),
    })
}
