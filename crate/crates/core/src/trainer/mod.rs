//! Desk-scale reference trainer.
//!
//! Seeded Gaussian-mixture data, label-noise injection and mini-batch SGD on
//! a linear softmax classifier that snapshots full-dataset logits after every
//! epoch. Everything is driven by [`Xoshiro256PlusPlus`] seeded through
//! SplitMix64, with Box–Muller normals, so identical seeds give identical
//! bits on every platform.
//!
//! [`Xoshiro256PlusPlus`]: rand_xoshiro::Xoshiro256PlusPlus

mod dataset;
mod rng;
mod softmax;
mod synth;

pub use dataset::{read_dataset, read_dataset_files, write_dataset, DatasetError, DatasetFiles, FEATURE_MAGIC};
pub use rng::{seeded, Gaussian};
pub use softmax::{
    accuracy, loss_and_grad, train_softmax, train_softmax_with_stats, LinearSoftmax, TrainConfig,
    TrainError, TrainOutput,
};
pub use synth::{
    inject_label_noise, synth_dataset, Flip, FlipRecord, NoiseError, SynthError, SyntheticDataset,
    SyntheticSpec,
};
