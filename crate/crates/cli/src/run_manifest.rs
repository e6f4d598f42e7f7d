//! Per-run provenance record.

use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_time_secs: f64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
        bytes += k as u64;
    }
    let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256,
        bytes,
    })
}

pub fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| digest(p)).collect()
}

/// Writes the manifest to `path`, or to stderr as one JSON line when the run
/// produced no file to sit next to.
pub fn emit(manifest: &RunManifest, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let json = serde_json::to_string_pretty(manifest)? + "\n";
            std::fs::write(p, json).with_context(|| format!("writing run manifest {}", p.display()))
        }
        None => {
            serde_json::to_writer(io::stderr(), manifest)?;
            eprintln!();
            Ok(())
        }
    }
}
