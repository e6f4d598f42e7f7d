//! CSV encoding of [`ScoreTable`] plus its JSON sidecar.
//!
//! `sample_id,label,score[,p_1..p_c]`; floats are written in Rust's shortest
//! round-trip form so reading a table back reproduces every score exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EpochSelector, Metric, MetricError, ScoreTable, SoftLabel};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("sidecar {path}: {source}")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed score table: {0}")]
    Malformed(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    pub metric: Metric,
    pub unit: String,
    pub selector: String,
    pub source_log: Option<String>,
    /// Seconds since the Unix epoch.
    pub created: u64,
    pub n_classes: usize,
    pub n_samples: usize,
}

/// `scores.csv` → `scores.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the CSV and its sidecar; `created` is stored verbatim (seconds
/// since the Unix epoch) so callers control reproducibility.
pub fn write_table(
    table: &ScoreTable,
    path: &Path,
    source_log: Option<&str>,
    created: u64,
) -> Result<(), TableError> {
    let mut w = csv::Writer::from_path(path)?;
    let c = table.n_classes;
    let mut header = vec!["sample_id".to_string(), "label".into(), "score".into()];
    if table.soft_labels.is_some() {
        header.extend((1..=c).map(|k| format!("p_{k}")));
    }
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut rec = vec![
            table.sample_ids[i].to_string(),
            table.labels[i].to_string(),
            table.scores[i].to_string(),
        ];
        if let Some(sl) = &table.soft_labels {
            rec.extend(sl[i].probs().iter().map(|p| p.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let sidecar = TableSidecar {
        metric: table.metric,
        unit: table.metric.unit().to_string(),
        selector: table.selector.to_string(),
        source_log: source_log.map(str::to_string),
        created,
        n_classes: c,
        n_samples: table.len(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| TableError::Sidecar {
        path: side.clone(),
        source: e,
    })?;
    fs::write(side, json + "\n")?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, row: usize) -> Result<T, TableError>
where
    T::Err: std::fmt::Display,
{
    field
        .trim()
        .parse()
        .map_err(|e| TableError::Malformed(format!("row {row}: bad {what} {field:?}: {e}")))
}

/// Reads a table and its sidecar.
pub fn read_table(path: &Path) -> Result<(ScoreTable, TableSidecar), TableError> {
    let side = sidecar_path(path);
    let sidecar: TableSidecar = serde_json::from_slice(&fs::read(&side)?).map_err(|e| TableError::Sidecar {
        path: side.clone(),
        source: e,
    })?;
    let selector: EpochSelector = sidecar.selector.parse().map_err(TableError::Malformed)?;

    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let fixed = ["sample_id", "label", "score"];
    if header.len() < 3 || header.iter().take(3).ne(fixed) {
        return Err(TableError::Malformed(format!(
            "header must start with sample_id,label,score (got {:?})",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let n_probs = header.len() - 3;
    if n_probs != 0 && n_probs != sidecar.n_classes {
        return Err(TableError::Malformed(format!(
            "{n_probs} probability columns for {} classes",
            sidecar.n_classes
        )));
    }

    let mut sample_ids = Vec::new();
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    let mut soft = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        sample_ids.push(parse::<u64>(&rec[0], "sample_id", row)?);
        labels.push(parse::<u32>(&rec[1], "label", row)?);
        scores.push(parse::<f64>(&rec[2], "score", row)?);
        if n_probs > 0 {
            let probs = (3..rec.len())
                .map(|k| parse::<f64>(&rec[k], "probability", row))
                .collect::<Result<Vec<_>, _>>()?;
            soft.push(SoftLabel::from_probs(probs)?);
        }
    }

    let table = ScoreTable {
        metric: sidecar.metric,
        selector,
        n_classes: sidecar.n_classes,
        sample_ids,
        labels,
        scores,
        soft_labels: (n_probs > 0).then_some(soft),
    };
    Ok((table, sidecar))
}
