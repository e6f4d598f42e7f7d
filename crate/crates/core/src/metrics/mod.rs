//! Per-sample importance metrics computed from a [`TrajectoryLog`].
//!
//! The proposed score is the entropy (in bits) of the soft label obtained by
//! applying softmax to a sample's epoch-averaged logits. The baselines are
//! area under the margin, forgetting events, EL2N and the moving-average
//! cross-entropy loss (in nats). All arithmetic is `f64`; stored `f32` logits
//! are promoted before any reduction and epochs are always reduced in
//! ascending order, so results do not depend on scheduling.

mod selector;
mod table;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::store::TrajectoryLog;

pub use selector::EpochSelector;
pub use table::{read_table, sidecar_path, write_table, TableError, TableSidecar};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("epoch selector {selector} is out of range for a log with {n_epochs} epoch(s)")]
    SelectorOutOfRange {
        selector: EpochSelector,
        n_epochs: usize,
    },
    #[error("epoch {epoch} is out of range for a log with {n_epochs} epoch(s)")]
    EpochOutOfRange { epoch: usize, n_epochs: usize },
    #[error("sample index {index} is out of range for {n_samples} samples")]
    SampleOutOfRange { index: usize, n_samples: usize },
    #[error("margin needs a non-assigned class, but the log has {0} class(es)")]
    MaxOverEmptySet(usize),
    #[error("metric {metric} cannot be computed over {selector}")]
    SelectorMismatch {
        metric: Metric,
        selector: EpochSelector,
    },
    #[error("score tables disagree on metric or epoch selector")]
    MetricMismatch,
    #[error("score tables cover different sample ids")]
    SampleSetMismatch,
    #[error("no score tables to combine")]
    NoTables,
    #[error("invalid soft label: {0}")]
    InvalidSoftLabel(String),
}

/// Importance metric identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Entropy,
    Aum,
    Forgetting,
    El2n,
    MovingAvgLoss,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Entropy,
        Metric::Aum,
        Metric::Forgetting,
        Metric::El2n,
        Metric::MovingAvgLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Entropy => "entropy",
            Metric::Aum => "aum",
            Metric::Forgetting => "forgetting",
            Metric::El2n => "el2n",
            Metric::MovingAvgLoss => "moving_avg_loss",
        }
    }

    /// Unit of the score column.
    pub fn unit(self) -> &'static str {
        match self {
            Metric::Entropy => "bits",
            Metric::Aum => "logit",
            Metric::Forgetting => "events",
            Metric::El2n => "probability",
            Metric::MovingAvgLoss => "nats",
        }
    }

    /// Forgetting counts transitions between consecutive selected epochs, so
    /// it needs more than one.
    pub fn accepts(self, sel: &EpochSelector) -> bool {
        !(self == Metric::Forgetting && sel.is_single())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy" => Ok(Metric::Entropy),
            "aum" => Ok(Metric::Aum),
            "forgetting" => Ok(Metric::Forgetting),
            "el2n" => Ok(Metric::El2n),
            "mal" | "moving_avg_loss" => Ok(Metric::MovingAvgLoss),
            other => Err(format!(
                "unknown metric {other:?} (expected entropy|aum|forgetting|el2n|mal)"
            )),
        }
    }
}

/// Class-probability vector: entries in `[0, 1]` summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabel {
    probs: Vec<f64>,
}

impl SoftLabel {
    /// Wraps externally supplied probabilities (e.g. read back from a score
    /// table), rejecting anything that is not a distribution.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, MetricError> {
        if probs.is_empty() {
            return Err(MetricError::InvalidSoftLabel("no classes".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(MetricError::InvalidSoftLabel(format!(
                "probability outside [0, 1] in {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::InvalidSoftLabel(format!("probabilities sum to {sum}")));
        }
        Ok(SoftLabel { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_sample(log: &TrajectoryLog, sample: usize) -> Result<(), MetricError> {
    if sample >= log.n_samples() {
        return Err(MetricError::SampleOutOfRange {
            index: sample,
            n_samples: log.n_samples(),
        });
    }
    Ok(())
}

fn promote(row: &[f32]) -> Vec<f64> {
    row.iter().map(|&v| f64::from(v)).collect()
}

/// `log Σ exp(z_i)` with the maximum factored out.
fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn mean_logits_over(log: &TrajectoryLog, sample: usize, epochs: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0f64; log.n_classes];
    for &t in epochs {
        for (a, &v) in acc.iter_mut().zip(log.row(t, sample)) {
            *a += f64::from(v);
        }
    }
    let count = epochs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    acc
}

/// Arithmetic mean of one sample's logit vectors over the selected epochs.
pub fn mean_logits(
    log: &TrajectoryLog,
    sample: usize,
    sel: &EpochSelector,
) -> Result<Vec<f64>, MetricError> {
    check_sample(log, sample)?;
    let epochs = sel.resolve(log.n_epochs)?;
    Ok(mean_logits_over(log, sample, &epochs))
}

/// Max-shifted softmax of (averaged) logits.
pub fn soft_label(mean: &[f64]) -> SoftLabel {
    SoftLabel {
        probs: softmax(mean),
    }
}

/// Shannon entropy in bits, `0·log 0 = 0`, clamped to `[0, log2 c]` to absorb
/// the last-ulp rounding at the uniform distribution.
pub fn entropy_score(sl: &SoftLabel) -> f64 {
    let h: f64 = -sl
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>();
    h.clamp(0.0, (sl.n_classes() as f64).log2())
}

fn margin(z: &[f32], label: usize) -> f64 {
    let assigned = f64::from(z[label]);
    let best_other = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label)
        .map(|(_, &v)| f64::from(v))
        .fold(f64::NEG_INFINITY, f64::max);
    assigned - best_other
}

fn aum_over(log: &TrajectoryLog, sample: usize, epochs: &[usize]) -> f64 {
    let label = log.labels[sample] as usize;
    let total: f64 = epochs.iter().map(|&t| margin(log.row(t, sample), label)).sum();
    total / epochs.len() as f64
}

/// Mean over the selected epochs of `z_y − max_{i≠y} z_i`.
pub fn aum_score(log: &TrajectoryLog, sample: usize, sel: &EpochSelector) -> Result<f64, MetricError> {
    check_sample(log, sample)?;
    if log.n_classes < 2 {
        return Err(MetricError::MaxOverEmptySet(log.n_classes));
    }
    let epochs = sel.resolve(log.n_epochs)?;
    Ok(aum_over(log, sample, &epochs))
}

/// Number of correct→incorrect transitions in a correctness sequence.
///
/// A sequence that is never correct returns its own length, which exceeds
/// every achievable transition count (at most `⌊len/2⌋`), so never-learned
/// samples rank hardest.
pub fn count_forgetting_events(correct: &[bool]) -> usize {
    if !correct.iter().any(|&c| c) {
        return correct.len();
    }
    correct.windows(2).filter(|w| w[0] && !w[1]).count()
}

fn forgetting_over(log: &TrajectoryLog, sample: usize, epochs: &[usize]) -> f64 {
    let label = log.labels[sample] as usize;
    let correct: Vec<bool> = epochs
        .iter()
        .map(|&t| argmax(log.row(t, sample)) == label)
        .collect();
    count_forgetting_events(&correct) as f64
}

/// Forgetting events over the whole logged trajectory.
pub fn forgetting_score(log: &TrajectoryLog, sample: usize) -> Result<f64, MetricError> {
    check_sample(log, sample)?;
    let epochs: Vec<usize> = (1..=log.n_epochs).collect();
    Ok(forgetting_over(log, sample, &epochs))
}

fn el2n_at(log: &TrajectoryLog, sample: usize, t: usize) -> f64 {
    let label = log.labels[sample] as usize;
    let p = softmax(&promote(log.row(t, sample)));
    p.iter()
        .enumerate()
        .map(|(i, &pi)| {
            let e = if i == label { pi - 1.0 } else { pi };
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖softmax(z) − onehot(y)‖₂` at one epoch.
pub fn el2n_score(log: &TrajectoryLog, sample: usize, at_epoch: usize) -> Result<f64, MetricError> {
    check_sample(log, sample)?;
    if at_epoch == 0 || at_epoch > log.n_epochs {
        return Err(MetricError::EpochOutOfRange {
            epoch: at_epoch,
            n_epochs: log.n_epochs,
        });
    }
    Ok(el2n_at(log, sample, at_epoch))
}

fn cross_entropy(z: &[f32], label: usize) -> f64 {
    let z = promote(z);
    log_sum_exp(&z) - z[label]
}

fn mal_over(log: &TrajectoryLog, sample: usize, epochs: &[usize]) -> f64 {
    let label = log.labels[sample] as usize;
    let total: f64 = epochs
        .iter()
        .map(|&t| cross_entropy(log.row(t, sample), label))
        .sum();
    total / epochs.len() as f64
}

/// Mean cross-entropy (nats) over the selected epochs.
pub fn moving_avg_loss(
    log: &TrajectoryLog,
    sample: usize,
    sel: &EpochSelector,
) -> Result<f64, MetricError> {
    check_sample(log, sample)?;
    let epochs = sel.resolve(log.n_epochs)?;
    Ok(mal_over(log, sample, &epochs))
}

/// Per-sample scores under one metric.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub metric: Metric,
    pub selector: EpochSelector,
    pub n_classes: usize,
    pub sample_ids: Vec<u64>,
    pub labels: Vec<u32>,
    pub scores: Vec<f64>,
    /// Present for entropy tables; purification consumes them.
    pub soft_labels: Option<Vec<SoftLabel>>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores every sample of `log` using the default [`Execution`].
pub fn score_dataset(
    log: &TrajectoryLog,
    metric: Metric,
    sel: &EpochSelector,
) -> Result<ScoreTable, MetricError> {
    score_dataset_with(log, metric, sel, Execution::default())
}

/// Scores every sample of `log`.
///
/// With a multi-epoch selector EL2N is averaged over the selected epochs;
/// `Single(t)` gives the usual single-checkpoint score. Forgetting counts
/// transitions along the selected epochs and rejects `Single`.
pub fn score_dataset_with(
    log: &TrajectoryLog,
    metric: Metric,
    sel: &EpochSelector,
    exec: Execution,
) -> Result<ScoreTable, MetricError> {
    if !metric.accepts(sel) {
        return Err(MetricError::SelectorMismatch {
            metric,
            selector: sel.clone(),
        });
    }
    if metric == Metric::Aum && log.n_classes < 2 {
        return Err(MetricError::MaxOverEmptySet(log.n_classes));
    }
    let epochs = sel.resolve(log.n_epochs)?;
    let n = log.n_samples();

    let (scores, soft_labels) = match metric {
        Metric::Entropy => {
            let labels = exec.map(n, |i| soft_label(&mean_logits_over(log, i, &epochs)));
            let scores = labels.iter().map(entropy_score).collect();
            (scores, Some(labels))
        }
        Metric::Aum => (exec.map(n, |i| aum_over(log, i, &epochs)), None),
        Metric::Forgetting => (exec.map(n, |i| forgetting_over(log, i, &epochs)), None),
        Metric::El2n => (
            exec.map(n, |i| {
                epochs.iter().map(|&t| el2n_at(log, i, t)).sum::<f64>() / epochs.len() as f64
            }),
            None,
        ),
        Metric::MovingAvgLoss => (exec.map(n, |i| mal_over(log, i, &epochs)), None),
    };

    Ok(ScoreTable {
        metric,
        selector: sel.clone(),
        n_classes: log.n_classes,
        sample_ids: log.sample_ids.clone(),
        labels: log.labels.clone(),
        scores,
        soft_labels,
    })
}

/// Per-sample mean of several runs' scores, aligned by sample id.
///
/// The output follows the first table's sample order. Soft labels are kept
/// only when a single table is passed: the mean of several runs' scores has no
/// single soft label behind it.
pub fn ensemble_average(tables: &[ScoreTable]) -> Result<ScoreTable, MetricError> {
    let first = tables.first().ok_or(MetricError::NoTables)?;
    if tables.len() == 1 {
        return Ok(first.clone());
    }
    let mut sums = first.scores.clone();
    let position: HashMap<u64, usize> = first
        .sample_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    if position.len() != first.sample_ids.len() {
        return Err(MetricError::SampleSetMismatch);
    }
    for table in &tables[1..] {
        if table.metric != first.metric || table.selector != first.selector {
            return Err(MetricError::MetricMismatch);
        }
        if table.sample_ids.len() != first.sample_ids.len() {
            return Err(MetricError::SampleSetMismatch);
        }
        let mut seen = vec![false; sums.len()];
        for (&id, &score) in table.sample_ids.iter().zip(&table.scores) {
            let &i = position.get(&id).ok_or(MetricError::SampleSetMismatch)?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(MetricError::SampleSetMismatch);
            }
            sums[i] += score;
        }
    }
    let k = tables.len() as f64;
    Ok(ScoreTable {
        scores: sums.into_iter().map(|s| s / k).collect(),
        soft_labels: None,
        ..first.clone()
    })
}
