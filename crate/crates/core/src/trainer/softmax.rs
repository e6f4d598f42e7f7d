use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::{seeded, Gaussian};
use super::synth::SyntheticDataset;
use crate::store::{StoreError, TrajectoryLog};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    /// Training produced a non-finite loss or logit. `partial` holds the
    /// epochs completed before the failure, if any.
    #[error("training diverged during epoch {epoch}")]
    DivergenceDetected {
        epoch: usize,
        partial: Option<Box<TrajectoryLog>>,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 12,
            batch_size: 32,
            learning_rate: 0.05,
            weight_init_scale: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_init_scale >= 0.0 && self.weight_init_scale.is_finite()) {
            return Err(TrainError::InvalidConfig(format!(
                "weight init scale must be >= 0, got {}",
                self.weight_init_scale
            )));
        }
        Ok(())
    }
}

/// Linear softmax classifier. `weights` is `n_classes × (dim + 1)` row-major;
/// the last column is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSoftmax {
    pub n_classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl LinearSoftmax {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        LinearSoftmax {
            n_classes,
            dim,
            weights: vec![0.0; n_classes * (dim + 1)],
        }
    }

    fn stride(&self) -> usize {
        self.dim + 1
    }

    /// `W·[x, 1]` into `out`.
    pub fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        let stride = self.stride();
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.weights[k * stride..(k + 1) * stride];
            *o = w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim];
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        self.logits_into(x, &mut out);
        out
    }
}

/// Mean cross-entropy of a batch and its gradient with respect to the
/// weights: `(1/B) Σ (softmax(W·x̂) − onehot(y)) x̂ᵀ` with `x̂ = [x, 1]`.
///
/// `features` holds `labels.len()` rows of `model.dim` values.
pub fn loss_and_grad(model: &LinearSoftmax, features: &[f64], labels: &[u32]) -> (f64, Vec<f64>) {
    let c = model.n_classes;
    let dim = model.dim;
    let stride = dim + 1;
    let batch = labels.len();
    let mut grad = vec![0.0; model.weights.len()];
    let mut z = vec![0.0; c];
    let mut loss = 0.0;
    for (x, &y) in features.chunks_exact(dim).zip(labels) {
        model.logits_into(x, &mut z);
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = z.iter().map(|v| (v - m).exp()).sum();
        let lse = m + total.ln();
        loss += lse - z[y as usize];
        for k in 0..c {
            let err = (z[k] - lse).exp() - if k == y as usize { 1.0 } else { 0.0 };
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gd, xd) in g[..dim].iter_mut().zip(x) {
                *gd += err * xd;
            }
            g[dim] += err;
        }
    }
    let scale = 1.0 / batch as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    (loss * scale, grad)
}

/// Fraction of rows whose argmax logit equals the label.
pub fn accuracy(model: &LinearSoftmax, ds: &SyntheticDataset) -> f64 {
    if ds.n_samples() == 0 {
        return 0.0;
    }
    let mut z = vec![0.0; model.n_classes];
    let mut x = vec![0.0; ds.dim];
    let correct = (0..ds.n_samples())
        .filter(|&i| {
            for (xd, &f) in x.iter_mut().zip(ds.row(i)) {
                *xd = f64::from(f);
            }
            model.logits_into(&x, &mut z);
            crate::metrics::argmax(&z) == ds.labels[i] as usize
        })
        .count();
    correct as f64 / ds.n_samples() as f64
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub log: TrajectoryLog,
    pub model: LinearSoftmax,
    /// Sample-weighted mean training loss of each epoch's mini-batches.
    pub epoch_losses: Vec<f64>,
}

pub fn train_softmax(ds: &SyntheticDataset, cfg: &TrainConfig) -> Result<TrajectoryLog, TrainError> {
    Ok(train_softmax_with_stats(ds, cfg)?.log)
}

/// Mini-batch SGD with a seeded shuffle per epoch; after every epoch the
/// logits of every sample are appended to the trajectory log.
pub fn train_softmax_with_stats(ds: &SyntheticDataset, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let n = ds.n_samples();
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let (c, dim) = (ds.n_classes, ds.dim);
    let x: Vec<f64> = ds.features.iter().map(|&v| f64::from(v)).collect();

    let mut rng = seeded(cfg.seed);
    let mut gauss = Gaussian::new();
    let mut model = LinearSoftmax::zeros(c, dim);
    for w in model.weights.iter_mut() {
        *w = cfg.weight_init_scale * gauss.sample(&mut rng);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size * dim);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);
    let mut logits: Vec<f32> = Vec::with_capacity(cfg.epochs * n * c);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut z = vec![0.0; c];

    let partial = |logits: &[f32], done: usize| -> Option<Box<TrajectoryLog>> {
        if done == 0 {
            return None;
        }
        TrajectoryLog::from_parts(ds.sample_ids.clone(), ds.labels.clone(), c, logits[..done * n * c].to_vec(), cfg.seed)
            .ok()
            .map(Box::new)
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(&x[i * dim..(i + 1) * dim]);
                batch_y.push(ds.labels[i]);
            }
            let (loss, grad) = loss_and_grad(&model, &batch_x, &batch_y);
            if !loss.is_finite() {
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    partial: partial(&logits, epoch - 1),
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        epoch_losses.push(epoch_loss / n as f64);

        for i in 0..n {
            model.logits_into(&x[i * dim..(i + 1) * dim], &mut z);
            logits.extend(z.iter().map(|&v| v as f32));
        }
        if logits[(epoch - 1) * n * c..].iter().any(|v| !v.is_finite()) {
            return Err(TrainError::DivergenceDetected {
                epoch,
                partial: partial(&logits, epoch - 1),
            });
        }
    }

    let log = TrajectoryLog::from_parts(ds.sample_ids.clone(), ds.labels.clone(), c, logits, cfg.seed)?;
    Ok(TrainOutput {
        log,
        model,
        epoch_losses,
    })
}
