use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;
use trajprune_core::store::{write_log, LogFormat};
use trajprune_core::trainer::{
    inject_label_noise, read_dataset_files, synth_dataset, train_softmax, write_dataset, DatasetFiles,
    SyntheticSpec, TrainConfig, TrainError,
};

use super::{beside, Ctx, Record};
use crate::exit::usage;

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Distance between neighbouring class means, in units of sigma.
    #[arg(long, default_value_t = 10.0)]
    pub sep: f64,
    /// Fraction of labels to flip, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of samples planted as near-duplicates of their class mean.
    #[arg(long, default_value_t = 0.0)]
    pub duplicates: f64,
    /// Spread of the planted duplicates, in units of sigma.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    /// Fold every ordinary sample to the side of its mean facing the other
    /// classes.
    #[arg(long)]
    pub boundary_facing: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(a: &SynthArgs, _ctx: &Ctx) -> Result<Record> {
    if !(0.0..1.0).contains(&a.noise) {
        return Err(usage(format!("--noise must be in [0, 1), got {}", a.noise)));
    }
    if !(0.0..1.0).contains(&a.duplicates) {
        return Err(usage(format!("--duplicates must be in [0, 1), got {}", a.duplicates)));
    }
    if !(a.sep > 0.0 && a.sep.is_finite()) {
        return Err(usage(format!("--sep must be positive, got {}", a.sep)));
    }
    let mut spec = SyntheticSpec::separated(a.classes, a.dim, a.per_class, a.sigma, a.sep, a.seed);
    spec.duplicate_fraction = a.duplicates;
    spec.duplicate_jitter = a.jitter;
    spec.boundary_facing = a.boundary_facing;
    let noise_seed = a.seed.wrapping_add(1);

    let clean = synth_dataset(&spec).context("invalid synth flags")?;
    let (ds, flips) = inject_label_noise(&clean, a.noise, noise_seed).context("invalid --noise")?;
    let files = write_dataset(&ds, &spec, &flips, &a.out)
        .with_context(|| format!("writing dataset to {}", a.out.display()))?;
    println!(
        "wrote {} samples ({} classes, dim {}), {} flipped labels, {} duplicates to {}",
        ds.n_samples(),
        ds.n_classes,
        ds.dim,
        flips.len(),
        ds.duplicates.len(),
        a.out.display()
    );
    Ok(Record {
        config: json!({
            "classes": a.classes,
            "dim": a.dim,
            "per_class": a.per_class,
            "sigma": a.sigma,
            "sep": a.sep,
            "noise": a.noise,
            "duplicates": a.duplicates,
            "jitter": a.jitter,
            "boundary_facing": a.boundary_facing,
            "seed": a.seed,
            "noise_seed": noise_seed,
            "out": a.out,
        }),
        inputs: vec![],
        outputs: files.all().iter().map(|p| p.to_path_buf()).collect(),
        manifest_path: Some(a.out.join("run.json")),
    })
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// Train on this manifest instead of the dataset's own (for example the
    /// output of `apply-plan`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Standard deviation of the initial weights.
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `binary` or `jsonl`; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<LogFormat>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn format_for(path: &Path, explicit: Option<LogFormat>) -> LogFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => LogFormat::Jsonl,
        _ => LogFormat::Binary,
    })
}

fn format_name(f: LogFormat) -> &'static str {
    match f {
        LogFormat::Binary => "binary",
        LogFormat::Jsonl => "jsonl",
    }
}

pub fn train(a: &TrainArgs, _ctx: &Ctx) -> Result<Record> {
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        weight_init_scale: a.init_scale,
        seed: a.seed,
    };
    cfg.validate()?;
    let files = DatasetFiles::in_dir(&a.data);
    let manifest = a.manifest.clone().unwrap_or_else(|| files.manifest.clone());
    let (ds, _, _) = read_dataset_files(&manifest, &files)
        .with_context(|| format!("reading dataset {}", a.data.display()))?;
    let format = format_for(&a.out, a.format);

    let log = match train_softmax(&ds, &cfg) {
        Ok(log) => log,
        Err(TrainError::DivergenceDetected { epoch, partial }) => {
            let mut msg = format!("training diverged during epoch {epoch}");
            if let Some(p) = partial {
                let mut name = a.out.file_name().unwrap_or_default().to_os_string();
                name.push(".partial");
                let path = a.out.with_file_name(name);
                write_log(&p, &path, format)?;
                msg.push_str(&format!("; {} completed epoch(s) saved to {}", p.n_epochs, path.display()));
            }
            return Err(anyhow::Error::new(TrainError::DivergenceDetected { epoch, partial: None }).context(msg));
        }
        Err(e) => return Err(e.into()),
    };
    write_log(&log, &a.out, format).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "trained {} epochs on {} samples; log written to {}",
        log.n_epochs,
        log.n_samples(),
        a.out.display()
    );

    let mut inputs = vec![manifest];
    inputs.extend([files.features, files.spec]);
    Ok(Record {
        config: json!({
            "data": a.data,
            "manifest": inputs[0],
            "epochs": cfg.epochs,
            "batch": cfg.batch_size,
            "lr": cfg.learning_rate,
            "init_scale": cfg.weight_init_scale,
            "seed": cfg.seed,
            "format": format_name(format),
            "out": a.out,
        }),
        inputs,
        outputs: vec![a.out.clone()],
        manifest_path: Some(beside(&a.out)),
    })
}
