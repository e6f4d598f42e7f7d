//! On-disk form of a synthetic dataset.
//!
//! A dataset directory holds `manifest.jsonl` (see [`crate::manifest`], with
//! `payload_ref = "row:<i>"`), `features.lfea`, `flips.csv`
//! (`sample_id,true_label,flipped_label`), `duplicates.csv` (`sample_id`) and
//! `spec.json`. The feature file is a header `b"LFEA" | u32 version=1 |
//! u64 n | u32 dim` followed by `n × dim` little-endian `f32`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::synth::{Flip, FlipRecord, SyntheticDataset, SyntheticSpec};
use crate::manifest::{read_manifest, write_manifest, Manifest, ManifestEntry, ManifestError};

pub const FEATURE_MAGIC: [u8; 4] = *b"LFEA";
const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("spec.json: {0}")]
    Spec(#[from] serde_json::Error),
    #[error("bad feature file: {0}")]
    Features(String),
    #[error("manifest entry {sample_id} has payload_ref {payload:?}; expected row:<index>")]
    PayloadRef { sample_id: u64, payload: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Paths of the files making up a dataset directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFiles {
    pub manifest: PathBuf,
    pub features: PathBuf,
    pub flips: PathBuf,
    pub duplicates: PathBuf,
    pub spec: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetFiles {
            manifest: dir.join("manifest.jsonl"),
            features: dir.join("features.lfea"),
            flips: dir.join("flips.csv"),
            duplicates: dir.join("duplicates.csv"),
            spec: dir.join("spec.json"),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [&self.manifest, &self.features, &self.flips, &self.duplicates, &self.spec]
    }
}

pub fn encode_features(ds: &SyntheticDataset) -> Vec<u8> {
    let mut buf = Vec::with_capacity(FEATURE_HEADER_LEN + ds.features.len() * 4);
    buf.extend_from_slice(&FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ds.n_samples() as u64).to_le_bytes());
    buf.extend_from_slice(&(ds.dim as u32).to_le_bytes());
    for v in &ds.features {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// `(n, dim, values)` from a feature file.
pub fn decode_features(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), DatasetError> {
    if bytes.len() < FEATURE_HEADER_LEN || bytes[..4] != FEATURE_MAGIC {
        return Err(DatasetError::Features("missing LFEA header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(DatasetError::Features(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as u64;
    let expected = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(FEATURE_HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(DatasetError::Features(format!(
            "{} bytes for {n} rows of {dim} values",
            bytes.len()
        )));
    }
    let values = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((n as usize, dim as usize, values))
}

/// Writes every dataset file into `dir` (created if needed).
pub fn write_dataset(
    ds: &SyntheticDataset,
    spec: &SyntheticSpec,
    flips: &FlipRecord,
    dir: &Path,
) -> Result<DatasetFiles, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = DatasetFiles::in_dir(dir);

    let manifest = Manifest {
        entries: (0..ds.n_samples())
            .map(|i| ManifestEntry {
                sample_id: ds.sample_ids[i],
                label: ds.labels[i],
                payload_ref: format!("row:{i}"),
                corrected: None,
            })
            .collect(),
    };
    write_manifest(&manifest, &files.manifest)?;
    fs::write(&files.features, encode_features(ds)).map_err(io_err(&files.features))?;

    let mut w = csv::Writer::from_path(&files.flips)?;
    w.write_record(["sample_id", "true_label", "flipped_label"])?;
    for f in &flips.flips {
        w.serialize((f.sample_id, f.true_label, f.flipped_label))?;
    }
    w.flush().map_err(io_err(&files.flips))?;

    let mut w = csv::Writer::from_path(&files.duplicates)?;
    w.write_record(["sample_id"])?;
    for id in &ds.duplicates {
        w.serialize([id])?;
    }
    w.flush().map_err(io_err(&files.duplicates))?;

    let spec_json = serde_json::to_string_pretty(spec)? + "\n";
    fs::write(&files.spec, spec_json).map_err(io_err(&files.spec))?;
    Ok(files)
}

/// Loaded dataset directory. Labels come from the manifest, so a manifest
/// rewritten by a plan yields the pruned/relabeled dataset.
pub fn read_dataset(dir: &Path) -> Result<(SyntheticDataset, SyntheticSpec, FlipRecord), DatasetError> {
    let files = DatasetFiles::in_dir(dir);
    read_dataset_files(&files.manifest, &files)
}

/// Like [`read_dataset`] but with the manifest taken from `manifest_path`.
pub fn read_dataset_files(
    manifest_path: &Path,
    files: &DatasetFiles,
) -> Result<(SyntheticDataset, SyntheticSpec, FlipRecord), DatasetError> {
    let manifest = read_manifest(manifest_path)?;
    let bytes = fs::read(&files.features).map_err(io_err(&files.features))?;
    let (n_rows, dim, values) = decode_features(&bytes)?;
    let spec_bytes = fs::read(&files.spec).map_err(io_err(&files.spec))?;
    let spec: SyntheticSpec = serde_json::from_slice(&spec_bytes)?;
    if dim != spec.dim {
        return Err(DatasetError::Features(format!(
            "feature file has dim {dim}, spec says {}",
            spec.dim
        )));
    }

    let mut ds = SyntheticDataset {
        n_classes: spec.n_classes,
        dim,
        sample_ids: Vec::with_capacity(manifest.len()),
        labels: Vec::with_capacity(manifest.len()),
        features: Vec::with_capacity(manifest.len() * dim),
        duplicates: Vec::new(),
    };
    for e in &manifest.entries {
        let row = e
            .payload_ref
            .strip_prefix("row:")
            .and_then(|r| r.parse::<usize>().ok())
            .filter(|&r| r < n_rows)
            .ok_or_else(|| DatasetError::PayloadRef {
                sample_id: e.sample_id,
                payload: e.payload_ref.clone(),
            })?;
        ds.sample_ids.push(e.sample_id);
        ds.labels.push(e.label);
        ds.features.extend_from_slice(&values[row * dim..(row + 1) * dim]);
    }

    let present: HashMap<u64, ()> = ds.sample_ids.iter().map(|&id| (id, ())).collect();
    let mut r = csv::Reader::from_path(&files.duplicates)?;
    for rec in r.deserialize::<(u64,)>() {
        let (id,) = rec?;
        if present.contains_key(&id) {
            ds.duplicates.push(id);
        }
    }

    let mut flips = FlipRecord::default();
    let mut r = csv::Reader::from_path(&files.flips)?;
    for rec in r.deserialize::<(u64, u32, u32)>() {
        let (sample_id, true_label, flipped_label) = rec?;
        flips.flips.push(Flip {
            sample_id,
            true_label,
            flipped_label,
        });
    }
    Ok((ds, spec, flips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::synth::{inject_label_noise, synth_dataset};

    #[test]
    fn dataset_directory_round_trip() {
        let mut spec = SyntheticSpec::separated(3, 2, 20, 1.0, 5.0, 3);
        spec.duplicate_fraction = 0.25;
        spec.duplicate_jitter = 0.1;
        let clean = synth_dataset(&spec).unwrap();
        let (ds, flips) = inject_label_noise(&clean, 0.2, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, &spec, &flips, dir.path()).unwrap();
        let (back, spec_back, flips_back) = read_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(spec_back, spec);
        assert_eq!(flips_back, flips);
    }

    #[test]
    fn feature_header_is_checked() {
        let ds = synth_dataset(&SyntheticSpec::separated(2, 3, 2, 1.0, 4.0, 0)).unwrap();
        let bytes = encode_features(&ds);
        assert_eq!(bytes.len(), 20 + 4 * 3 * 4);
        assert_eq!(&bytes[..4], b"LFEA");
        let (n, dim, values) = decode_features(&bytes).unwrap();
        assert_eq!((n, dim), (4, 3));
        assert_eq!(values, ds.features);
        assert!(decode_features(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_features(b"NOPE").is_err());
    }
}
