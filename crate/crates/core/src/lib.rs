//! Dataset curation from classifier training dynamics.
//!
//! The crate consumes per-epoch logit trajectories ([`store::TrajectoryLog`]),
//! scores every sample ([`metrics`]), purifies the dataset by relabeling and
//! outlier removal ([`purify`]) and turns scores into pruning plans
//! ([`prune`]). A small linear softmax trainer ([`trainer`]) produces real
//! trajectories on synthetic Gaussian mixtures so the whole pipeline can be
//! exercised end to end, and [`experiment`] runs the retraining comparison
//! grid.
//!
//! Per-sample work runs on rayon when the `parallel` feature is enabled (the
//! default); see [`Execution`].

pub mod exec;
pub mod experiment;
pub mod manifest;
pub mod metrics;
pub mod prune;
pub mod purify;
pub mod store;
pub mod trainer;

pub use exec::Execution;
pub use metrics::{EpochSelector, Metric, ScoreTable, SoftLabel};
pub use purify::{PurificationPlan, PurifyConfig, Verdict};
pub use prune::{PrunePlan, Ranking};
pub use store::{TrajectoryLog, ValidationReport};
