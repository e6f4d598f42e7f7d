//! Retraining comparisons and label-correction bookkeeping.
//!
//! [`run_compare`] scores a training set once, builds a prune plan for every
//! (method, rate) pair and retrains the reference classifier on the kept
//! samples under several seeds, reporting held-out accuracy. Cells are
//! independent and run on the [`Execution`] pool; each retraining run stays
//! single-threaded, so the report is identical under either execution mode.
//! Epoch count is fixed per run, so the number of SGD iterations scales with
//! the number of kept samples.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::exec::Execution;
use crate::metrics::{score_dataset_with, EpochSelector, Metric, MetricError};
use crate::prune::{make_prune_plan, random_prune_plan, rank_samples_with, PruneError, PrunePlan};
use crate::purify::Correction;
use crate::trainer::{
    accuracy, synth_dataset, train_softmax, train_softmax_with_stats, FlipRecord, SynthError,
    SyntheticDataset, SyntheticSpec, TrainConfig, TrainError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid comparison: {0}")]
    Invalid(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// How a compare cell chooses what to drop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PruneMethod {
    Metric(Metric),
    Random,
    /// Full dataset, no pruning.
    None,
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneMethod::Metric(m) => write!(f, "{m}"),
            PruneMethod::Random => f.write_str("random"),
            PruneMethod::None => f.write_str("none"),
        }
    }
}

impl std::str::FromStr for PruneMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PruneMethod::Random),
            "none" => Ok(PruneMethod::None),
            other => other.parse().map(PruneMethod::Metric),
        }
    }
}

/// Selector used when a comparison does not override it: the whole logged
/// trajectory, except EL2N which is read at the last epoch.
pub fn default_selector(metric: Metric, n_epochs: usize) -> EpochSelector {
    match metric {
        Metric::El2n => EpochSelector::Single(n_epochs),
        _ => EpochSelector::EveryK(1),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareConfig {
    /// Methods besides the implicit `none` baseline.
    pub methods: Vec<PruneMethod>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Run whose trajectory is scored.
    pub score_run: TrainConfig,
    /// Retraining hyper-parameters; the seed is replaced per cell.
    pub retrain: TrainConfig,
    /// Overrides [`default_selector`] for every metric.
    pub selector: Option<EpochSelector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareCell {
    pub method: PruneMethod,
    pub rate: f64,
    pub seed: u64,
    pub n_kept: usize,
    pub accuracy: f64,
    pub removed: Vec<u64>,
}

/// Mean/std of held-out accuracy across seeds for one (method, rate).
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub rate: f64,
    pub method: PruneMethod,
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single seed.
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub cells: Vec<CompareCell>,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn cell(&self, method: PruneMethod, rate: f64, seed: u64) -> Option<&CompareCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.rate == rate && c.seed == seed)
    }

    pub fn row(&self, method: PruneMethod, rate: f64) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.method == method && r.rate == rate)
    }

    /// Plot-ready CSV: `rate,metric,mean,std,n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rate,metric,mean,std,n")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.rate, r.method, r.mean, r.std, r.n)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_compare(
    train: &SyntheticDataset,
    test: &SyntheticDataset,
    cfg: &CompareConfig,
    exec: Execution,
) -> Result<CompareReport, ExperimentError> {
    if cfg.seeds.is_empty() || cfg.rates.is_empty() {
        return Err(ExperimentError::Invalid("need at least one seed and one rate".into()));
    }
    if let Some(&r) = cfg.rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(PruneError::RateOutOfRange(r).into());
    }

    let mut plans: HashMap<(PruneMethod, usize, u64), PrunePlan> = HashMap::new();
    let mut grid: Vec<(PruneMethod, f64, u64)> = Vec::new();
    let metrics: Vec<Metric> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            PruneMethod::Metric(metric) => Some(*metric),
            _ => None,
        })
        .collect();
    if !metrics.is_empty() {
        let log = train_softmax(train, &cfg.score_run)?;
        for &metric in &metrics {
            let sel = cfg
                .selector
                .clone()
                .unwrap_or_else(|| default_selector(metric, log.n_epochs));
            let table = score_dataset_with(&log, metric, &sel, exec)?;
            let ranking = rank_samples_with(&table, exec)?;
            for (ri, &rate) in cfg.rates.iter().enumerate() {
                let plan = make_prune_plan(&ranking, rate)?;
                for &seed in &cfg.seeds {
                    plans.insert((PruneMethod::Metric(metric), ri, seed), plan.clone());
                }
            }
        }
    }
    for &method in &cfg.methods {
        if method == PruneMethod::None {
            continue;
        }
        for (ri, &rate) in cfg.rates.iter().enumerate() {
            for &seed in &cfg.seeds {
                if method == PruneMethod::Random {
                    plans.insert((method, ri, seed), random_prune_plan(&train.sample_ids, rate, seed)?);
                }
                grid.push((method, rate, seed));
            }
        }
    }
    for &seed in &cfg.seeds {
        grid.push((PruneMethod::None, 0.0, seed));
    }

    let rate_index = |rate: f64| cfg.rates.iter().position(|&r| r == rate).unwrap_or(0);
    let cells = exec.try_map(grid.len(), |g| -> Result<CompareCell, ExperimentError> {
        let (method, rate, seed) = grid[g];
        let removed = match method {
            PruneMethod::None => Vec::new(),
            _ => plans[&(method, rate_index(rate), seed)].removed.clone(),
        };
        let drop: HashSet<u64> = removed.iter().copied().collect();
        let keep: HashSet<u64> = train.sample_ids.iter().copied().filter(|id| !drop.contains(id)).collect();
        let kept = train.subset(&keep);
        let run = TrainConfig {
            seed,
            ..cfg.retrain
        };
        let out = train_softmax_with_stats(&kept, &run)?;
        Ok(CompareCell {
            method,
            rate,
            seed,
            n_kept: kept.n_samples(),
            accuracy: accuracy(&out.model, test),
            removed,
        })
    })?;

    let mut rows = Vec::new();
    let mut order: Vec<(PruneMethod, f64)> = Vec::new();
    for c in &cells {
        if !order.contains(&(c.method, c.rate)) {
            order.push((c.method, c.rate));
        }
    }
    for (method, rate) in order {
        let accs: Vec<f64> = cells
            .iter()
            .filter(|c| c.method == method && c.rate == rate)
            .map(|c| c.accuracy)
            .collect();
        let (mean, std) = mean_std(&accs);
        rows.push(CompareRow {
            rate,
            method,
            mean,
            std,
            n: accs.len(),
        });
    }
    Ok(CompareReport { cells, rows })
}

/// Prototype-heavy benchmark: three boundary-facing Gaussian classes in the
/// plane with 30% of samples planted as near-duplicates of their class mean.
pub fn duplicate_benchmark_spec(seed: u64) -> SyntheticSpec {
    let mut spec = SyntheticSpec::separated(3, 2, 200, 1.0, 3.0, seed);
    spec.duplicate_fraction = 0.3;
    spec.duplicate_jitter = 0.05;
    spec.boundary_facing = true;
    spec
}

/// Held-out draw from the same mixture as `spec` under an unrelated seed.
pub fn held_out(spec: &SyntheticSpec) -> Result<SyntheticDataset, SynthError> {
    let test_spec = SyntheticSpec {
        seed: spec.seed ^ 0x9E37_79B9_7F4A_7C15,
        ..spec.clone()
    };
    synth_dataset(&test_spec)
}

/// Label-correction quality against a known flip record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionQuality {
    /// Corrections that restore a flipped sample's true label, over all
    /// corrections.
    pub precision: f64,
    /// Flipped samples restored to their true label, over all flips.
    pub recall: f64,
    /// Fraction of samples whose label after correction equals the clean
    /// label.
    pub label_accuracy: f64,
}

/// `noisy` carries the post-injection labels the corrections were made from.
pub fn correction_quality(noisy: &SyntheticDataset, flips: &FlipRecord, corrections: &[Correction]) -> CorrectionQuality {
    let truth: HashMap<u64, u32> = flips.flips.iter().map(|f| (f.sample_id, f.true_label)).collect();
    let hits = corrections
        .iter()
        .filter(|c| truth.get(&c.sample_id) == Some(&c.new_label))
        .count();
    let fixed: HashMap<u64, u32> = corrections.iter().map(|c| (c.sample_id, c.new_label)).collect();
    let correct_labels = noisy
        .sample_ids
        .iter()
        .zip(&noisy.labels)
        .filter(|(id, &label)| {
            let clean = truth.get(id).copied().unwrap_or(label);
            fixed.get(id).copied().unwrap_or(label) == clean
        })
        .count();
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    CorrectionQuality {
        precision: ratio(hits, corrections.len()),
        recall: ratio(hits, flips.len()),
        label_accuracy: ratio(correct_labels, noisy.n_samples()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Flip;

    fn small_cfg(methods: Vec<PruneMethod>) -> CompareConfig {
        CompareConfig {
            methods,
            rates: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            seeds: vec![0, 1],
            score_run: TrainConfig { epochs: 4, ..TrainConfig::default() },
            retrain: TrainConfig { epochs: 3, ..TrainConfig::default() },
            selector: None,
        }
    }

    fn data() -> (SyntheticDataset, SyntheticDataset) {
        let mut spec = duplicate_benchmark_spec(1);
        spec.n_per_class = 40;
        (synth_dataset(&spec).unwrap(), held_out(&spec).unwrap())
    }

    #[test]
    fn grid_shape_and_baseline() {
        let (train, test) = data();
        let cfg = small_cfg(vec![PruneMethod::Metric(Metric::Entropy), PruneMethod::Random]);
        let report = run_compare(&train, &test, &cfg, Execution::default()).unwrap();
        assert_eq!(report.rows.len(), 2 * 6 + 1);
        let none = report.row(PruneMethod::None, 0.0).unwrap();
        for m in [PruneMethod::Metric(Metric::Entropy), PruneMethod::Random] {
            assert_eq!(report.row(m, 0.0).unwrap().mean, none.mean);
        }
        assert!(report.rows.iter().all(|r| r.n == 2 && r.std.is_finite()));
        let cell = report.cell(PruneMethod::Random, 0.5, 1).unwrap();
        assert_eq!(cell.n_kept, 60);
    }

    #[test]
    fn report_is_execution_independent() {
        let (train, test) = data();
        let cfg = small_cfg(vec![PruneMethod::Metric(Metric::El2n), PruneMethod::Random]);
        let a = run_compare(&train, &test, &cfg, Execution::Sequential).unwrap();
        let b = run_compare(&train, &test, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_layout() {
        let report = CompareReport {
            cells: vec![],
            rows: vec![CompareRow {
                rate: 0.1,
                method: PruneMethod::Metric(Metric::Entropy),
                mean: 0.9,
                std: 0.01,
                n: 4,
            }],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "rate,metric,mean,std,n\n0.1,entropy,0.9,0.01,4\n");
    }

    #[test]
    fn quality_counts() {
        let noisy = SyntheticDataset {
            n_classes: 3,
            dim: 1,
            sample_ids: vec![0, 1, 2, 3],
            labels: vec![1, 0, 2, 2],
            features: vec![0.0; 4],
            duplicates: vec![],
        };
        let flips = FlipRecord {
            flips: vec![
                Flip { sample_id: 0, true_label: 0, flipped_label: 1 },
                Flip { sample_id: 3, true_label: 1, flipped_label: 2 },
            ],
        };
        let corrections = [
            Correction { sample_id: 0, old_label: 1, new_label: 0 },
            Correction { sample_id: 2, old_label: 2, new_label: 1 },
        ];
        let q = correction_quality(&noisy, &flips, &corrections);
        assert_eq!(q.precision, 0.5);
        assert_eq!(q.recall, 0.5);
        assert_eq!(q.label_accuracy, 0.5);
    }

    #[test]
    fn method_names_parse() {
        for name in ["entropy", "aum", "forgetting", "el2n", "mal", "random", "none"] {
            assert!(name.parse::<PruneMethod>().is_ok(), "{name}");
        }
        assert!("kcenter".parse::<PruneMethod>().is_err());
    }
}
