use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::{seeded, Gaussian};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise ratio {0} is outside [0, 1)")]
    RatioOutOfRange(f64),
    #[error("label noise needs at least two classes")]
    TooFewClasses,
}

/// Parameters of a seeded Gaussian mixture.
///
/// Beyond the plain isotropic mixture two knobs shape the curation benchmark:
/// `duplicate_fraction` replaces that share of samples with near-copies of
/// their class mean (isotropic jitter `duplicate_jitter·sigma`), and
/// `boundary_facing` reflects each ordinary sample's offset so it never lies
/// further from the mixture centroid than its class mean, leaving the
/// prototype region to the duplicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub n_per_class: usize,
    /// `n_classes × dim`, row-major.
    pub class_means: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub duplicate_fraction: f64,
    #[serde(default)]
    pub duplicate_jitter: f64,
    #[serde(default)]
    pub boundary_facing: bool,
}

impl SyntheticSpec {
    /// Class means spaced so that the closest pair is `sep·sigma` apart: on a
    /// line for `dim = 1`, otherwise evenly on a circle in the first two
    /// coordinates.
    pub fn separated(n_classes: usize, dim: usize, n_per_class: usize, sigma: f64, sep: f64, seed: u64) -> Self {
        let gap = sep * sigma;
        let mut class_means = vec![0.0; n_classes * dim];
        if dim == 1 {
            let offset = gap * (n_classes as f64 - 1.0) / 2.0;
            for k in 0..n_classes {
                class_means[k] = k as f64 * gap - offset;
            }
        } else if dim >= 2 && n_classes >= 2 {
            let radius = gap / (2.0 * (std::f64::consts::PI / n_classes as f64).sin());
            for k in 0..n_classes {
                let angle = std::f64::consts::TAU * k as f64 / n_classes as f64;
                class_means[k * dim] = radius * angle.cos();
                class_means[k * dim + 1] = radius * angle.sin();
            }
        }
        SyntheticSpec {
            n_classes,
            dim,
            n_per_class,
            class_means,
            sigma,
            seed,
            duplicate_fraction: 0.0,
            duplicate_jitter: 0.0,
            boundary_facing: false,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_classes * self.n_per_class
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.class_means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_classes == 0 || self.dim == 0 || self.n_per_class == 0 {
            return bad("classes, dim and per-class count must be positive".into());
        }
        if self.class_means.len() != self.n_classes * self.dim {
            return bad(format!(
                "{} mean coordinates for {} classes in {} dims",
                self.class_means.len(),
                self.n_classes,
                self.dim
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.class_means.iter().any(|v| !v.is_finite()) {
            return bad("class means must be finite".into());
        }
        for a in 0..self.n_classes {
            for b in a + 1..self.n_classes {
                if self.mean(a) == self.mean(b) {
                    return bad(format!("classes {a} and {b} share a mean"));
                }
            }
        }
        if !(0.0..1.0).contains(&self.duplicate_fraction) {
            return bad(format!("duplicate fraction {} is outside [0, 1)", self.duplicate_fraction));
        }
        if !(self.duplicate_jitter >= 0.0 && self.duplicate_jitter.is_finite()) {
            return bad(format!("duplicate jitter {} must be >= 0", self.duplicate_jitter));
        }
        Ok(())
    }
}

/// Labeled feature vectors; sample ids are `0..n`, class-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub n_classes: usize,
    pub dim: usize,
    pub sample_ids: Vec<u64>,
    pub labels: Vec<u32>,
    /// `n × dim`, row-major. Stored at the precision of the feature file.
    pub features: Vec<f32>,
    /// Ids of planted near-duplicates of class means.
    pub duplicates: Vec<u64>,
}

impl SyntheticDataset {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Samples whose id is in `keep`, in the dataset's own order.
    pub fn subset(&self, keep: &std::collections::HashSet<u64>) -> SyntheticDataset {
        let mut out = SyntheticDataset {
            n_classes: self.n_classes,
            dim: self.dim,
            sample_ids: Vec::new(),
            labels: Vec::new(),
            features: Vec::new(),
            duplicates: self.duplicates.iter().copied().filter(|id| keep.contains(id)).collect(),
        };
        for i in 0..self.n_samples() {
            if keep.contains(&self.sample_ids[i]) {
                out.sample_ids.push(self.sample_ids[i]);
                out.labels.push(self.labels[i]);
                out.features.extend_from_slice(self.row(i));
            }
        }
        out
    }
}

/// Deterministic draw from the mixture described by `spec`.
pub fn synth_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset, SynthError> {
    spec.validate()?;
    let n = spec.n_samples();
    let dim = spec.dim;
    let mut rng = seeded(spec.seed);
    let mut gauss = Gaussian::new();

    let n_dup = count_at_rate(spec.duplicate_fraction, n);
    let mut is_dup = vec![false; n];
    for i in index::sample(&mut rng, n, n_dup) {
        is_dup[i] = true;
    }

    let centroid: Vec<f64> = (0..dim)
        .map(|d| (0..spec.n_classes).map(|k| spec.mean(k)[d]).sum::<f64>() / spec.n_classes as f64)
        .collect();

    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * dim);
    let mut offset = vec![0.0; dim];
    for k in 0..spec.n_classes {
        let mean = spec.mean(k);
        let outward: Vec<f64> = mean.iter().zip(&centroid).map(|(m, c)| m - c).collect();
        let outward_norm = outward.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..spec.n_per_class {
            let i = k * spec.n_per_class + j;
            let scale = if is_dup[i] {
                spec.duplicate_jitter * spec.sigma
            } else {
                spec.sigma
            };
            for o in offset.iter_mut() {
                *o = scale * gauss.sample(&mut rng);
            }
            if spec.boundary_facing && !is_dup[i] && outward_norm > 0.0 {
                let proj = offset.iter().zip(&outward).map(|(o, u)| o * u).sum::<f64>() / outward_norm;
                if proj > 0.0 {
                    for (o, u) in offset.iter_mut().zip(&outward) {
                        *o -= 2.0 * proj * u / outward_norm;
                    }
                }
            }
            labels.push(k as u32);
            features.extend(mean.iter().zip(&offset).map(|(m, o)| (m + o) as f32));
        }
    }

    Ok(SyntheticDataset {
        n_classes: spec.n_classes,
        dim,
        sample_ids: (0..n as u64).collect(),
        labels,
        features,
        duplicates: (0..n as u64).filter(|&i| is_dup[i as usize]).collect(),
    })
}

/// `⌊rate·n⌋`, treating products within 1e-9 (relative) of an integer as
/// that integer.
fn count_at_rate(rate: f64, n: usize) -> usize {
    let x = rate * n as f64;
    let nearest = x.round();
    let count = if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    };
    (count.max(0.0) as usize).min(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flip {
    pub sample_id: u64,
    pub true_label: u32,
    pub flipped_label: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub flips: Vec<Flip>,
}

impl FlipRecord {
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }
}

/// Flips exactly `⌊ratio·n⌋` labels, chosen uniformly without replacement,
/// each to a uniformly chosen different class.
pub fn inject_label_noise(
    ds: &SyntheticDataset,
    ratio: f64,
    seed: u64,
) -> Result<(SyntheticDataset, FlipRecord), NoiseError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(NoiseError::RatioOutOfRange(ratio));
    }
    let n = ds.n_samples();
    let m = count_at_rate(ratio, n);
    if m == 0 {
        return Ok((ds.clone(), FlipRecord::default()));
    }
    if ds.n_classes < 2 {
        return Err(NoiseError::TooFewClasses);
    }
    let mut rng = seeded(seed);
    let mut chosen = index::sample(&mut rng, n, m).into_vec();
    chosen.sort_unstable();

    let mut out = ds.clone();
    let c = ds.n_classes as u32;
    let flips = chosen
        .into_iter()
        .map(|i| {
            let true_label = ds.labels[i];
            let flipped_label = (true_label + 1 + rng.gen_range(0..c - 1)) % c;
            out.labels[i] = flipped_label;
            Flip {
                sample_id: ds.sample_ids[i],
                true_label,
                flipped_label,
            }
        })
        .collect();
    Ok((out, FlipRecord { flips }))
}
