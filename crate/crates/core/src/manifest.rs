//! Dataset manifest: one JSON object per sample.
//!
//! `{"sample_id": u64, "label": u32, "payload_ref": "...", "corrected": bool?}`
//! where `payload_ref` is opaque (a file path, or `row:<i>` into a feature
//! file). `corrected` is only written for entries relabeled by a plan.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate sample id {0} in manifest")]
    DuplicateSampleId(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: u64,
    pub label: u32,
    pub payload_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.sample_id)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    parse_manifest(&fs::read_to_string(path)?)
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| ManifestError::Json { line: i + 1, source: e })?;
        if !seen.insert(entry.sample_id) {
            return Err(ManifestError::DuplicateSampleId(entry.sample_id));
        }
        entries.push(entry);
    }
    Ok(Manifest { entries })
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), ManifestError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (i, entry) in manifest.entries.iter().enumerate() {
        serde_json::to_writer(&mut out, entry).map_err(|e| ManifestError::Json { line: i + 1, source: e })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
