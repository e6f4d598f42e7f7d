//! Rankings, prune plans and manifest rewriting.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::exec::Execution;
use crate::manifest::{Manifest, ManifestEntry};
use crate::metrics::{Metric, ScoreTable};

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("cannot rank an empty score table")]
    EmptyTable,
    #[error("prune rate {0} is outside [0, 1)")]
    RateOutOfRange(f64),
    #[error("plan refers to sample id {0}, which is not in the manifest")]
    UnknownSampleId(u64),
}

/// Number of samples removed at `rate`: `⌈rate·n⌉`.
///
/// Products within a relative 1e-9 of an integer count as that integer, so
/// `0.07·100` removes 7 samples rather than 8 after floating-point rounding.
pub fn prune_budget(rate: f64, n: usize) -> usize {
    let x = rate * n as f64;
    let nearest = x.round();
    let budget = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (budget.max(0.0) as usize).min(n)
}

fn check_rate(rate: f64) -> Result<(), PruneError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(PruneError::RateOutOfRange(rate))
    }
}

/// Samples ordered from easiest (lowest score) to hardest.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    pub metric: Metric,
    pub sample_ids: Vec<u64>,
    pub scores: Vec<f64>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}

/// Key order used everywhere: score ascending, then sample id ascending.
pub(crate) fn score_then_id(a: (f64, u64), b: (f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn rank_samples(table: &ScoreTable) -> Result<Ranking, PruneError> {
    rank_samples_with(table, Execution::default())
}

pub fn rank_samples_with(table: &ScoreTable, exec: Execution) -> Result<Ranking, PruneError> {
    if table.is_empty() {
        return Err(PruneError::EmptyTable);
    }
    let mut keyed: Vec<(f64, u64)> = table
        .scores
        .iter()
        .copied()
        .zip(table.sample_ids.iter().copied())
        .collect();
    exec.sort_by(&mut keyed, |a, b| score_then_id(*a, *b));
    Ok(Ranking {
        metric: table.metric,
        scores: keyed.iter().map(|k| k.0).collect(),
        sample_ids: keyed.into_iter().map(|k| k.1).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrunePlan {
    /// In ranking order (easiest first).
    pub removed: Vec<u64>,
    /// In ranking order.
    pub kept: Vec<u64>,
    pub rate: f64,
}

/// Removes the first `⌈rate·n⌉` samples of the ranking.
pub fn make_prune_plan(ranking: &Ranking, rate: f64) -> Result<PrunePlan, PruneError> {
    check_rate(rate)?;
    let k = prune_budget(rate, ranking.len());
    Ok(PrunePlan {
        removed: ranking.sample_ids[..k].to_vec(),
        kept: ranking.sample_ids[k..].to_vec(),
        rate,
    })
}

/// Random-pruning baseline: a seeded uniform subset of size `⌈rate·n⌉`.
pub fn random_prune_plan(sample_ids: &[u64], rate: f64, seed: u64) -> Result<PrunePlan, PruneError> {
    check_rate(rate)?;
    let mut order = sample_ids.to_vec();
    order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
    let k = prune_budget(rate, order.len());
    let kept = order.split_off(k);
    Ok(PrunePlan {
        removed: order,
        kept,
        rate,
    })
}

#[derive(Debug, Error)]
pub enum PlanFileError {
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed prune plan: {0}")]
    Malformed(String),
}

/// CSV `sample_id,action` with `action` one of `remove`/`keep`; removed rows
/// come first, each group in ranking order.
pub fn write_prune_plan(plan: &PrunePlan, path: &Path) -> Result<(), PlanFileError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "action"])?;
    for id in &plan.removed {
        w.write_record([id.to_string().as_str(), "remove"])?;
    }
    for id in &plan.kept {
        w.write_record([id.to_string().as_str(), "keep"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a plan written by [`write_prune_plan`]. The rate is not stored, so
/// the returned plan carries the effective rate `removed / n`.
pub fn read_prune_plan(path: &Path) -> Result<PrunePlan, PlanFileError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != ["sample_id", "action"] {
        return Err(PlanFileError::Malformed("expected header sample_id,action".into()));
    }
    let (mut removed, mut kept) = (Vec::new(), Vec::new());
    for (row, rec) in r.deserialize::<(u64, String)>().enumerate() {
        let (id, action) = rec?;
        match action.as_str() {
            "remove" => removed.push(id),
            "keep" => kept.push(id),
            other => return Err(PlanFileError::Malformed(format!("row {row}: unknown action {other:?}"))),
        }
    }
    let n = removed.len() + kept.len();
    let rate = if n == 0 { 0.0 } else { removed.len() as f64 / n as f64 };
    Ok(PrunePlan { removed, kept, rate })
}

/// What a plan does to one sample; samples without an action are kept as is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleAction {
    Remove,
    Relabel(u32),
}

/// Anything that can be applied to a manifest.
pub trait PlanActions {
    fn actions(&self) -> Vec<(u64, SampleAction)>;
}

impl PlanActions for PrunePlan {
    fn actions(&self) -> Vec<(u64, SampleAction)> {
        self.removed.iter().map(|&id| (id, SampleAction::Remove)).collect()
    }
}

/// Drops removed samples and rewrites relabeled ones (marking them
/// `corrected`), keeping the manifest's original order.
pub fn apply_plan<P: PlanActions + ?Sized>(manifest: &Manifest, plan: &P) -> Result<Manifest, PruneError> {
    let known: HashSet<u64> = manifest.ids().collect();
    let mut actions = HashMap::new();
    for (id, action) in plan.actions() {
        if !known.contains(&id) {
            return Err(PruneError::UnknownSampleId(id));
        }
        actions.insert(id, action);
    }
    let entries = manifest
        .entries
        .iter()
        .filter_map(|e| match actions.get(&e.sample_id) {
            None => Some(e.clone()),
            Some(SampleAction::Remove) => None,
            Some(&SampleAction::Relabel(label)) => Some(ManifestEntry {
                label,
                corrected: Some(true),
                ..e.clone()
            }),
        })
        .collect();
    Ok(Manifest { entries })
}
