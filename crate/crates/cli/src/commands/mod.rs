mod compare;
mod curate;
mod data;
mod report;
mod scoring;

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use trajprune_core::{EpochSelector, Execution, Metric};

use crate::exit::usage;
use crate::run_manifest::unix_now;

pub use compare::{compare, CompareArgs};
pub use curate::{apply_plan, prune, purify, ApplyPlanArgs, PruneArgs, PurifyArgs};
pub use data::{synth, train, SynthArgs, TrainArgs};
pub use report::{report, ReportArgs};
pub use scoring::{score, validate, ScoreArgs, ValidateArgs};

pub struct Ctx {
    pub exec: Execution,
}

/// What a successful subcommand hands back for its run manifest.
pub struct Record {
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Default manifest location; `None` sends it to stderr.
    pub manifest_path: Option<PathBuf>,
}

/// `out/plan.csv` → `out/plan.csv.run.json`.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    path.with_file_name(name)
}

/// `SOURCE_DATE_EPOCH` when set, so repeated runs can produce identical
/// sidecars; otherwise the current time.
pub fn creation_time() -> Result<u64> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("SOURCE_DATE_EPOCH must be an integer, got {v:?}"))),
        Err(_) => Ok(unix_now()),
    }
}

/// Mutually exclusive epoch-selector flags.
#[derive(Args, Clone, Debug, Default)]
#[group(multiple = false)]
pub struct SelectorArgs {
    /// Every k-th epoch: k, 2k, ...
    #[arg(long, value_name = "K")]
    pub every_k: Option<usize>,
    /// A single epoch.
    #[arg(long, value_name = "E")]
    pub at_epoch: Option<usize>,
    /// Epochs 1 through T.
    #[arg(long, value_name = "T")]
    pub upto: Option<usize>,
    /// Explicit comma-separated epoch list.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub epochs: Option<Vec<usize>>,
}

impl SelectorArgs {
    pub fn given(&self) -> Option<EpochSelector> {
        if let Some(k) = self.every_k {
            Some(EpochSelector::EveryK(k))
        } else if let Some(e) = self.at_epoch {
            Some(EpochSelector::Single(e))
        } else if let Some(t) = self.upto {
            Some(EpochSelector::UpTo(t))
        } else {
            self.epochs.clone().map(EpochSelector::Explicit)
        }
    }

    /// The selector for `metric` on a log of `n_epochs`, rejecting
    /// combinations the metric cannot use.
    pub fn resolve(&self, metric: Metric, n_epochs: usize) -> Result<EpochSelector> {
        let sel = self
            .given()
            .unwrap_or_else(|| trajprune_core::experiment::default_selector(metric, n_epochs));
        if !metric.accepts(&sel) {
            return Err(usage(format!("metric {metric} cannot be computed over {sel}")));
        }
        sel.resolve(n_epochs)?;
        Ok(sel)
    }
}
