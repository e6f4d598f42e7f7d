//! Data purification from soft labels: label correction, outlier removal
//! and the combined outliers → correction → easy-pruning pipeline.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{entropy_score, EpochSelector, Metric, ScoreTable, SoftLabel};
use crate::prune::{prune_budget, score_then_id, PlanActions, SampleAction};
use crate::store::TrajectoryLog;

pub const DEFAULT_DELTA: f64 = 0.10;

#[derive(Debug, Error)]
pub enum PurifyError {
    #[error("score table carries no soft labels (score with metric=entropy)")]
    MissingSoftLabels,
    #[error("purification needs an entropy score table, got {0}")]
    NotEntropy(Metric),
    #[error("invalid purification config: {0}")]
    InvalidConfig(String),
    #[error("score table and log cover different samples")]
    SampleSetMismatch,
    #[error("soft label has {found} classes, log has {expected}")]
    ClassCountMismatch { expected: usize, found: usize },
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("plan summary: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed plan file: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurifyConfig {
    /// Outlier threshold on the largest soft-label probability (inclusive).
    pub delta: f64,
    pub prune_rate: f64,
    pub enable_correction: bool,
    pub enable_outlier_removal: bool,
}

impl Default for PurifyConfig {
    fn default() -> Self {
        PurifyConfig {
            delta: DEFAULT_DELTA,
            prune_rate: 0.0,
            enable_correction: true,
            enable_outlier_removal: true,
        }
    }
}

impl PurifyConfig {
    pub fn validate(&self) -> Result<(), PurifyError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PurifyError::InvalidConfig(format!(
                "delta {} is outside (0, 1)",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.prune_rate) {
            return Err(PurifyError::InvalidConfig(format!(
                "prune rate {} is outside [0, 1)",
                self.prune_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Relabel(u32),
    RemoveOutlier,
    PruneEasy,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Keep => "keep",
            Verdict::Relabel(_) => "relabel",
            Verdict::RemoveOutlier => "remove_outlier",
            Verdict::PruneEasy => "prune_easy",
        }
    }

    pub fn is_removal(self) -> bool {
        matches!(self, Verdict::RemoveOutlier | Verdict::PruneEasy)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Correction {
    pub sample_id: u64,
    pub old_label: u32,
    pub new_label: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEntry {
    pub sample_id: u64,
    pub old_label: u32,
    pub verdict: Verdict,
    pub entropy: f64,
    pub max_prob: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCounts {
    pub n_samples: usize,
    /// `⌈prune_rate·n⌉`.
    pub budget: usize,
    pub n_outliers: usize,
    pub n_corrected: usize,
    pub n_pruned_easy: usize,
    /// Outliers alone exceeded the budget, so no easy samples were pruned.
    pub budget_exceeded: bool,
}

impl PlanCounts {
    pub fn total_removed(&self) -> usize {
        self.n_outliers + self.n_pruned_easy
    }
}

/// One verdict per sample, in the score table's order.
#[derive(Clone, Debug, PartialEq)]
pub struct PurificationPlan {
    pub entries: Vec<PlanEntry>,
    pub counts: PlanCounts,
    pub config: PurifyConfig,
    pub selector: EpochSelector,
}

impl PurificationPlan {
    pub fn with_verdict(&self, pred: impl Fn(Verdict) -> bool) -> impl Iterator<Item = &PlanEntry> {
        self.entries.iter().filter(move |e| pred(e.verdict))
    }
}

impl PlanActions for PurificationPlan {
    fn actions(&self) -> Vec<(u64, SampleAction)> {
        self.entries
            .iter()
            .filter_map(|e| match e.verdict {
                Verdict::Keep => None,
                Verdict::Relabel(new) => Some((e.sample_id, SampleAction::Relabel(new))),
                Verdict::RemoveOutlier | Verdict::PruneEasy => Some((e.sample_id, SampleAction::Remove)),
            })
            .collect()
    }
}

fn soft_labels(table: &ScoreTable) -> Result<&[SoftLabel], PurifyError> {
    table.soft_labels.as_deref().ok_or(PurifyError::MissingSoftLabels)
}

/// Assigned label from `log` for every row of `table`.
fn aligned_labels(log: &TrajectoryLog, table: &ScoreTable) -> Result<Vec<u32>, PurifyError> {
    if log.n_samples() != table.len() {
        return Err(PurifyError::SampleSetMismatch);
    }
    if table.sample_ids == log.sample_ids {
        return Ok(log.labels.clone());
    }
    let by_id: HashMap<u64, u32> = log.sample_ids.iter().copied().zip(log.labels.iter().copied()).collect();
    table
        .sample_ids
        .iter()
        .map(|id| by_id.get(id).copied().ok_or(PurifyError::SampleSetMismatch))
        .collect()
}

/// Samples whose soft-label argmax disagrees with the assigned label in
/// `log`, with the argmax as the corrected label.
pub fn correct_labels(log: &TrajectoryLog, table: &ScoreTable) -> Result<Vec<Correction>, PurifyError> {
    let soft = soft_labels(table)?;
    let labels = aligned_labels(log, table)?;
    check_classes(soft, log.n_classes)?;
    Ok(table
        .sample_ids
        .iter()
        .zip(soft)
        .zip(labels)
        .filter_map(|((&sample_id, sl), old_label)| {
            let new_label = sl.argmax() as u32;
            (new_label != old_label).then_some(Correction {
                sample_id,
                old_label,
                new_label,
            })
        })
        .collect())
}

fn check_classes(soft: &[SoftLabel], expected: usize) -> Result<(), PurifyError> {
    match soft.iter().find(|s| s.n_classes() != expected) {
        Some(s) => Err(PurifyError::ClassCountMismatch {
            expected,
            found: s.n_classes(),
        }),
        None => Ok(()),
    }
}

/// Samples with `max(soft label) ≤ delta`.
pub fn detect_outliers(table: &ScoreTable, delta: f64) -> Result<Vec<u64>, PurifyError> {
    let soft = soft_labels(table)?;
    Ok(table
        .sample_ids
        .iter()
        .zip(soft)
        .filter(|(_, sl)| sl.max_prob() <= delta)
        .map(|(&id, _)| id)
        .collect())
}

/// Runs the three stages in order: every outlier is removed, remaining
/// argmax disagreements are relabeled, then the lowest-entropy survivors are
/// pruned until outliers plus easy samples fill `⌈prune_rate·n⌉`. Relabeled
/// samples stay eligible for easy-pruning. Entropy ties break by ascending
/// sample id.
pub fn purify_pipeline(
    log: &TrajectoryLog,
    table: &ScoreTable,
    cfg: &PurifyConfig,
) -> Result<PurificationPlan, PurifyError> {
    cfg.validate()?;
    if table.metric != Metric::Entropy {
        return Err(PurifyError::NotEntropy(table.metric));
    }
    let soft = soft_labels(table)?;
    check_classes(soft, log.n_classes)?;
    let labels = aligned_labels(log, table)?;
    let n = table.len();

    let mut entries: Vec<PlanEntry> = (0..n)
        .map(|i| PlanEntry {
            sample_id: table.sample_ids[i],
            old_label: labels[i],
            verdict: Verdict::Keep,
            entropy: entropy_score(&soft[i]),
            max_prob: soft[i].max_prob(),
        })
        .collect();

    let mut counts = PlanCounts {
        n_samples: n,
        budget: prune_budget(cfg.prune_rate, n),
        ..PlanCounts::default()
    };

    if cfg.enable_outlier_removal {
        for e in entries.iter_mut().filter(|e| e.max_prob <= cfg.delta) {
            e.verdict = Verdict::RemoveOutlier;
            counts.n_outliers += 1;
        }
    }

    if cfg.enable_correction {
        for (e, sl) in entries.iter_mut().zip(soft) {
            let new_label = sl.argmax() as u32;
            if e.verdict == Verdict::Keep && new_label != e.old_label {
                e.verdict = Verdict::Relabel(new_label);
            }
        }
    }

    counts.budget_exceeded = counts.n_outliers > counts.budget;
    let easy_quota = counts.budget.saturating_sub(counts.n_outliers);
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| entries[i].verdict != Verdict::RemoveOutlier)
        .collect();
    candidates.sort_by(|&a, &b| {
        score_then_id(
            (entries[a].entropy, entries[a].sample_id),
            (entries[b].entropy, entries[b].sample_id),
        )
    });
    for &i in candidates.iter().take(easy_quota) {
        entries[i].verdict = Verdict::PruneEasy;
    }
    counts.n_pruned_easy = easy_quota.min(candidates.len());
    counts.n_corrected = entries
        .iter()
        .filter(|e| matches!(e.verdict, Verdict::Relabel(_)))
        .count();

    Ok(PurificationPlan {
        entries,
        counts,
        config: *cfg,
        selector: table.selector.clone(),
    })
}

/// JSON summary written next to the plan CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub counts: PlanCounts,
    pub config: PurifyConfig,
    pub selector: String,
    pub total_removed: usize,
}

/// `plan.csv` → `plan.json`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// CSV `sample_id,verdict,old_label,new_label,entropy,max_prob` plus the JSON
/// summary. `new_label` is empty unless the verdict is `relabel`.
pub fn write_plan(plan: &PurificationPlan, path: &Path) -> Result<(), PurifyError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "verdict", "old_label", "new_label", "entropy", "max_prob"])?;
    for e in &plan.entries {
        let new_label = match e.verdict {
            Verdict::Relabel(l) => l.to_string(),
            _ => String::new(),
        };
        w.write_record([
            e.sample_id.to_string(),
            e.verdict.name().to_string(),
            e.old_label.to_string(),
            new_label,
            e.entropy.to_string(),
            e.max_prob.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = PlanSummary {
        counts: plan.counts,
        config: plan.config,
        selector: plan.selector.to_string(),
        total_removed: plan.counts.total_removed(),
    };
    fs::write(summary_path(path), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

pub fn read_plan(path: &Path) -> Result<PurificationPlan, PurifyError> {
    let summary: PlanSummary = serde_json::from_slice(&fs::read(summary_path(path))?)?;
    let selector = summary.selector.parse().map_err(PurifyError::Malformed)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(PurifyError::Malformed(format!("row {row}: expected 6 fields")));
        }
        let bad = |what: &str| PurifyError::Malformed(format!("row {row}: bad {what}"));
        let verdict = match &rec[1] {
            "keep" => Verdict::Keep,
            "relabel" => Verdict::Relabel(rec[3].parse().map_err(|_| bad("new_label"))?),
            "remove_outlier" => Verdict::RemoveOutlier,
            "prune_easy" => Verdict::PruneEasy,
            _ => return Err(bad("verdict")),
        };
        entries.push(PlanEntry {
            sample_id: rec[0].parse().map_err(|_| bad("sample_id"))?,
            old_label: rec[2].parse().map_err(|_| bad("old_label"))?,
            verdict,
            entropy: rec[4].parse().map_err(|_| bad("entropy"))?,
            max_prob: rec[5].parse().map_err(|_| bad("max_prob"))?,
        });
    }
    Ok(PurificationPlan {
        entries,
        counts: summary.counts,
        config: summary.config,
        selector,
    })
}
