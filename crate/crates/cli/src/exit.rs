//! Exit-status policy: 2 for usage and validation failures, 3 for runtime
//! failures (divergence, corrupt or unreadable input).

use std::fmt;
use std::io;

use trajprune_core::experiment::ExperimentError;
use trajprune_core::metrics::{MetricError, TableError};
use trajprune_core::prune::PruneError;
use trajprune_core::purify::PurifyError;
use trajprune_core::trainer::{NoiseError, SynthError, TrainError};

pub const USAGE: u8 = 2;
pub const RUNTIME: u8 = 3;

/// A problem with the flags or inputs the caller supplied.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        TrainError::InvalidConfig(_) | TrainError::EmptyDataset => USAGE,
        TrainError::DivergenceDetected { .. } | TrainError::Store(_) => RUNTIME,
    }
}

fn code_of(cause: &(dyn std::error::Error + 'static)) -> Option<u8> {
    if cause.is::<UsageError>()
        || cause.is::<MetricError>()
        || cause.is::<PruneError>()
        || cause.is::<SynthError>()
        || cause.is::<NoiseError>()
    {
        return Some(USAGE);
    }
    if let Some(e) = cause.downcast_ref::<io::Error>() {
        return (e.kind() == io::ErrorKind::NotFound).then_some(USAGE);
    }
    if let Some(e) = cause.downcast_ref::<TrainError>() {
        return Some(train_code(e));
    }
    if let Some(e) = cause.downcast_ref::<ExperimentError>() {
        return match e {
            ExperimentError::Train(t) => Some(train_code(t)),
            ExperimentError::Io(_) => None,
            _ => Some(USAGE),
        };
    }
    if let Some(e) = cause.downcast_ref::<PurifyError>() {
        return match e {
            PurifyError::MissingSoftLabels
            | PurifyError::NotEntropy(_)
            | PurifyError::InvalidConfig(_)
            | PurifyError::SampleSetMismatch
            | PurifyError::ClassCountMismatch { .. } => Some(USAGE),
            _ => None,
        };
    }
    if let Some(TableError::Metric(_)) = cause.downcast_ref::<TableError>() {
        return Some(USAGE);
    }
    None
}

/// First decisive cause in the chain wins; anything unclassified is a
/// runtime failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain().find_map(code_of).unwrap_or(RUNTIME)
}
