use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use trajprune_core::manifest::read_manifest;
use trajprune_core::metrics::{read_table, sidecar_path};
use trajprune_core::purify::{read_plan, summary_path};
use trajprune_core::{Metric, ScoreTable, Verdict};

use super::{beside, Ctx, Record};
use crate::exit::usage;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Plan written by `purify`.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Score table written by `score`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Manifest used to resolve payload references of listed samples.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of hardest samples to list.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Text summary destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV listing: kind,sample_id,label,new_label,score,payload_ref.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

struct Row {
    kind: &'static str,
    sample_id: u64,
    label: u32,
    new_label: Option<u32>,
    score: f64,
}

/// Hardest first: low margin for AUM, high score for every other metric.
/// Ties go to the lower sample id.
pub fn hardest_first(table: &ScoreTable) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..table.len()).collect();
    let descending = table.metric != Metric::Aum;
    idx.sort_by(|&a, &b| {
        let (sa, sb) = (table.scores[a], table.scores[b]);
        let by_score = if descending { sb.total_cmp(&sa) } else { sa.total_cmp(&sb) };
        by_score.then(table.sample_ids[a].cmp(&table.sample_ids[b]))
    });
    idx
}

pub fn report(a: &ReportArgs, _ctx: &Ctx) -> Result<Record> {
    if a.plan.is_none() && a.scores.is_none() {
        return Err(usage("report needs --plan and/or --scores"));
    }
    let mut inputs = Vec::new();
    let payloads: HashMap<u64, String> = match &a.manifest {
        Some(p) => {
            inputs.push(p.clone());
            read_manifest(p)
                .with_context(|| format!("reading {}", p.display()))?
                .entries
                .into_iter()
                .map(|e| (e.sample_id, e.payload_ref))
                .collect()
        }
        None => HashMap::new(),
    };
    let payload = |id: u64| payloads.get(&id).map(String::as_str).unwrap_or("");

    let mut text = String::new();
    let mut rows: Vec<Row> = Vec::new();

    if let Some(path) = &a.plan {
        inputs.extend([path.clone(), summary_path(path)]);
        let plan = read_plan(path).with_context(|| format!("reading {}", path.display()))?;
        let c = &plan.counts;
        writeln!(
            text,
            "Plan {} ({} samples, selector {}, delta {}, prune rate {})",
            path.display(),
            c.n_samples,
            plan.selector,
            plan.config.delta,
            plan.config.prune_rate
        )?;
        if c.n_outliers + c.n_corrected + c.n_pruned_easy == 0 {
            writeln!(text, "  no actions")?;
        } else {
            writeln!(text, "  outliers removed:    {}", c.n_outliers)?;
            writeln!(text, "  labels corrected:    {}", c.n_corrected)?;
            writeln!(text, "  easy samples pruned: {} (budget {})", c.n_pruned_easy, c.budget)?;
        }
        let corrections: Vec<_> = plan.with_verdict(|v| matches!(v, Verdict::Relabel(_))).collect();
        if !corrections.is_empty() {
            writeln!(text, "\nCorrections (old -> new):")?;
            for e in corrections {
                let Verdict::Relabel(new) = e.verdict else { unreachable!() };
                writeln!(text, "  {:>10}  {} -> {}  {}", e.sample_id, e.old_label, new, payload(e.sample_id))?;
                rows.push(Row {
                    kind: "correction",
                    sample_id: e.sample_id,
                    label: e.old_label,
                    new_label: Some(new),
                    score: e.max_prob,
                });
            }
        }
        let outliers: Vec<_> = plan.with_verdict(|v| v == Verdict::RemoveOutlier).collect();
        if !outliers.is_empty() {
            writeln!(text, "\nOutliers (max soft-label probability):")?;
            for e in outliers {
                writeln!(text, "  {:>10}  {:.4}  {}", e.sample_id, e.max_prob, payload(e.sample_id))?;
                rows.push(Row {
                    kind: "outlier",
                    sample_id: e.sample_id,
                    label: e.old_label,
                    new_label: None,
                    score: e.max_prob,
                });
            }
        }
    }

    if let Some(path) = &a.scores {
        inputs.extend([path.clone(), sidecar_path(path)]);
        let (table, side) = read_table(path).with_context(|| format!("reading {}", path.display()))?;
        let order = hardest_first(&table);
        let k = a.top.min(order.len());
        if !text.is_empty() {
            text.push('\n');
        }
        writeln!(
            text,
            "Top {k} hardest of {} by {} ({}, {}):",
            table.len(),
            table.metric,
            side.unit,
            table.selector
        )?;
        for (rank, &i) in order[..k].iter().enumerate() {
            let id = table.sample_ids[i];
            writeln!(
                text,
                "  {:>4}  {:>10}  label {:>3}  {:.6}  {}",
                rank + 1,
                id,
                table.labels[i],
                table.scores[i],
                payload(id)
            )?;
            rows.push(Row {
                kind: "hardest",
                sample_id: id,
                label: table.labels[i],
                new_label: None,
                score: table.scores[i],
            });
        }
    }

    let mut outputs = Vec::new();
    match &a.out {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            outputs.push(p.clone());
        }
        None => print!("{text}"),
    }
    if let Some(p) = &a.csv {
        let mut csv = String::from("kind,sample_id,label,new_label,score,payload_ref\n");
        for r in &rows {
            let new = r.new_label.map(|l| l.to_string()).unwrap_or_default();
            let payload = payload(r.sample_id).replace('"', "\"\"");
            writeln!(csv, "{},{},{},{},{},\"{}\"", r.kind, r.sample_id, r.label, new, r.score, payload)?;
        }
        std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
        outputs.push(p.clone());
    }

    let manifest_path = outputs.first().map(|p| beside(p));
    Ok(Record {
        config: json!({
            "plan": a.plan,
            "scores": a.scores,
            "manifest": a.manifest,
            "top": a.top,
            "out": a.out,
            "csv": a.csv,
        }),
        inputs,
        outputs,
        manifest_path,
    })
}
