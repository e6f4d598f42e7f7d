//! Trajectory logs: per-epoch logit matrices plus assigned labels.
//!
//! Two on-disk encodings are supported. The binary "LTRJ v1" layout is
//! canonical (all integers and floats little-endian):
//!
//! ```text
//! header      b"LTRJ" | u32 version=1 | u64 n_samples | u32 n_classes | u32 n_epochs | u64 run_seed
//! sample ids  n_samples x u64
//! labels      n_samples x u32
//! epoch t     u32 epoch_index (t = 1..=T) | n_samples x n_classes x f32, row-major by sample
//! ```
//!
//! The JSONL variant carries the same content as one header object followed
//! by one `{epoch, sample_id, label, logits}` object per (epoch, sample).

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"LTRJ";
pub const FORMAT_VERSION: u32 = 1;
/// Bytes in the fixed binary header.
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("not a trajectory log (leading bytes {0:02x?})")]
    MagicMismatch(Vec<u8>),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: header declares {expected} bytes/records, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("non-finite logit for sample {sample_id} at epoch {epoch}")]
    NonFinite { sample_id: u64, epoch: usize },
    #[error("duplicate sample id {0}")]
    DuplicateSampleId(u64),
    #[error("epoch gap: expected epoch {expected}, found {found}")]
    EpochGap { expected: usize, found: usize },
    #[error("label {label} of sample {sample_id} is outside [0, {n_classes})")]
    LabelOutOfRange {
        sample_id: u64,
        label: u32,
        n_classes: usize,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("JSONL line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Binary,
    Jsonl,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "binary" | "ltrj" => Ok(LogFormat::Binary),
            "jsonl" => Ok(LogFormat::Jsonl),
            other => Err(format!("unknown log format {other:?} (expected binary|jsonl)")),
        }
    }
}

/// Raw record of training dynamics.
///
/// `logits` is epoch-major: epoch `t` (1-indexed) occupies
/// `[(t-1)·n·c, t·n·c)` and within it sample `i` occupies a contiguous row of
/// `n_classes` values. Values are stored as `f32`; every consumer promotes to
/// `f64` before arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub sample_ids: Vec<u64>,
    pub labels: Vec<u32>,
    pub n_classes: usize,
    pub n_epochs: usize,
    pub logits: Vec<f32>,
    pub run_seed: u64,
    pub schema_version: u32,
}

impl TrajectoryLog {
    /// Builds a log from epoch-major logits and checks every invariant.
    pub fn from_parts(
        sample_ids: Vec<u64>,
        labels: Vec<u32>,
        n_classes: usize,
        logits: Vec<f32>,
        run_seed: u64,
    ) -> Result<Self, StoreError> {
        let n = sample_ids.len();
        let row = n.checked_mul(n_classes).unwrap_or(0);
        if row == 0 {
            return Err(StoreError::Format(
                "log needs at least one sample and one class".into(),
            ));
        }
        if logits.len() % row != 0 {
            return Err(StoreError::Format(format!(
                "{} logits is not a whole number of {n}x{n_classes} epochs",
                logits.len()
            )));
        }
        let log = TrajectoryLog {
            sample_ids,
            labels,
            n_classes,
            n_epochs: logits.len() / row,
            logits,
            run_seed,
            schema_version: FORMAT_VERSION,
        };
        log.check()?;
        Ok(log)
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    /// The `n × c` matrix for 1-indexed epoch `t`.
    pub fn epoch(&self, t: usize) -> &[f32] {
        let len = self.n_samples() * self.n_classes;
        &self.logits[(t - 1) * len..t * len]
    }

    /// Logit vector of sample index `i` at 1-indexed epoch `t`.
    pub fn row(&self, t: usize, i: usize) -> &[f32] {
        let c = self.n_classes;
        let start = ((t - 1) * self.n_samples() + i) * c;
        &self.logits[start..start + c]
    }

    /// Strided view over one sample's logit vectors, epoch 1 first.
    pub fn trajectory(&self, i: usize) -> impl Iterator<Item = &[f32]> + '_ {
        (1..=self.n_epochs).map(move |t| self.row(t, i))
    }

    pub fn index_of(&self, sample_id: u64) -> Option<usize> {
        self.sample_ids.iter().position(|&id| id == sample_id)
    }

    /// First invariant violation as an error, used on read and before write.
    fn check(&self) -> Result<(), StoreError> {
        let n = self.n_samples();
        if self.schema_version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(self.schema_version));
        }
        if self.n_epochs == 0 {
            return Err(StoreError::Format("a log needs at least one epoch (T >= 1)".into()));
        }
        if self.n_classes == 0 || n == 0 {
            return Err(StoreError::Format(
                "log needs at least one sample and one class".into(),
            ));
        }
        if self.labels.len() != n {
            return Err(StoreError::Format(format!(
                "{} labels for {n} samples",
                self.labels.len()
            )));
        }
        if self.logits.len() != self.n_epochs * n * self.n_classes {
            return Err(StoreError::Format(format!(
                "{} logits, expected {}",
                self.logits.len(),
                self.n_epochs * n * self.n_classes
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for (&id, &label) in self.sample_ids.iter().zip(&self.labels) {
            if !seen.insert(id) {
                return Err(StoreError::DuplicateSampleId(id));
            }
            if label as usize >= self.n_classes {
                return Err(StoreError::LabelOutOfRange {
                    sample_id: id,
                    label,
                    n_classes: self.n_classes,
                });
            }
        }
        if let Some(pos) = self.logits.iter().position(|v| !v.is_finite()) {
            let per_epoch = n * self.n_classes;
            return Err(StoreError::NonFinite {
                sample_id: self.sample_ids[(pos % per_epoch) / self.n_classes],
                epoch: pos / per_epoch + 1,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IssueCode {
    UnsupportedVersion,
    NoEpochs,
    EmptyLog,
    ShapeMismatch,
    LabelOutOfRange,
    DuplicateSampleId,
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IssueLocation {
    Log,
    Sample(u64),
    Epoch(usize),
    SampleEpoch { sample_id: u64, epoch: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub location: IssueLocation,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        ValidationReport {
            ok: issues.is_empty(),
            issues,
        }
    }

    pub fn count(&self, code: IssueCode) -> usize {
        self.issues.iter().filter(|i| i.code == code).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        writeln!(f, "{} issue(s)", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {:?} at {:?}: {}", issue.code, issue.location, issue.message)?;
        }
        Ok(())
    }
}

/// Reports every invariant violation; never fails.
pub fn validate(log: &TrajectoryLog) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |code, location, message: String| {
        issues.push(Issue {
            code,
            location,
            message,
        })
    };
    let n = log.n_samples();
    let c = log.n_classes;

    if log.schema_version != FORMAT_VERSION {
        push(
            IssueCode::UnsupportedVersion,
            IssueLocation::Log,
            format!("schema version {} (expected {FORMAT_VERSION})", log.schema_version),
        );
    }
    if log.n_epochs == 0 {
        push(IssueCode::NoEpochs, IssueLocation::Log, "T must be at least 1".into());
    }
    if n == 0 || c == 0 {
        push(
            IssueCode::EmptyLog,
            IssueLocation::Log,
            format!("{n} samples, {c} classes"),
        );
    }
    if log.labels.len() != n {
        push(
            IssueCode::ShapeMismatch,
            IssueLocation::Log,
            format!("{} labels for {n} samples", log.labels.len()),
        );
    }
    let expected = log.n_epochs * n * c;
    let shape_ok = log.logits.len() == expected;
    if !shape_ok {
        push(
            IssueCode::ShapeMismatch,
            IssueLocation::Log,
            format!("{} logits, expected {expected}", log.logits.len()),
        );
    }

    let mut seen = HashSet::with_capacity(n);
    for &id in &log.sample_ids {
        if !seen.insert(id) {
            push(
                IssueCode::DuplicateSampleId,
                IssueLocation::Sample(id),
                format!("sample id {id} appears more than once"),
            );
        }
    }
    for (&id, &label) in log.sample_ids.iter().zip(&log.labels) {
        if label as usize >= c {
            push(
                IssueCode::LabelOutOfRange,
                IssueLocation::Sample(id),
                format!("label {label} not in [0, {c})"),
            );
        }
    }

    if shape_ok && n > 0 && c > 0 {
        for t in 1..=log.n_epochs {
            for (i, &id) in log.sample_ids.iter().enumerate() {
                if let Some(v) = log.row(t, i).iter().find(|v| !v.is_finite()) {
                    push(
                        IssueCode::NonFinite,
                        IssueLocation::SampleEpoch { sample_id: id, epoch: t },
                        format!("logit {v}"),
                    );
                }
            }
        }
    }

    ValidationReport::from_issues(issues)
}

/// Writes `log` to `path` in the requested encoding.
pub fn write_log(log: &TrajectoryLog, path: &Path, format: LogFormat) -> Result<(), StoreError> {
    log.check()?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    match format {
        LogFormat::Binary => encode_binary(log, &mut out)?,
        LogFormat::Jsonl => encode_jsonl(log, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

/// Size in bytes of the binary encoding for the given dimensions.
pub fn binary_len(n_samples: usize, n_classes: usize, n_epochs: usize) -> usize {
    HEADER_LEN + n_samples * (8 + 4) + n_epochs * (4 + n_samples * n_classes * 4)
}

pub fn encode_binary<W: Write>(log: &TrajectoryLog, out: &mut W) -> io::Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(log.n_samples() as u64).to_le_bytes())?;
    out.write_all(&(log.n_classes as u32).to_le_bytes())?;
    out.write_all(&(log.n_epochs as u32).to_le_bytes())?;
    out.write_all(&log.run_seed.to_le_bytes())?;
    for id in &log.sample_ids {
        out.write_all(&id.to_le_bytes())?;
    }
    for label in &log.labels {
        out.write_all(&label.to_le_bytes())?;
    }
    for t in 1..=log.n_epochs {
        out.write_all(&(t as u32).to_le_bytes())?;
        for v in log.epoch(t) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    version: u32,
    n_samples: u64,
    n_classes: u32,
    n_epochs: u32,
    run_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    epoch: usize,
    sample_id: u64,
    label: u32,
    logits: Vec<f32>,
}

fn encode_jsonl<W: Write>(log: &TrajectoryLog, out: &mut W) -> Result<(), StoreError> {
    let header = JsonHeader {
        version: log.schema_version,
        n_samples: log.n_samples() as u64,
        n_classes: log.n_classes as u32,
        n_epochs: log.n_epochs as u32,
        run_seed: log.run_seed,
    };
    serde_json::to_writer(&mut *out, &header).map_err(|e| StoreError::Json { line: 1, source: e })?;
    out.write_all(b"\n")?;
    let mut line = 1;
    for t in 1..=log.n_epochs {
        for (i, (&sample_id, &label)) in log.sample_ids.iter().zip(&log.labels).enumerate() {
            line += 1;
            let rec = JsonRecord {
                epoch: t,
                sample_id,
                label,
                logits: log.row(t, i).to_vec(),
            };
            serde_json::to_writer(&mut *out, &rec).map_err(|e| StoreError::Json { line, source: e })?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads a binary or JSONL log, detected from the leading bytes.
pub fn open_log(path: &Path) -> Result<TrajectoryLog, StoreError> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<TrajectoryLog, StoreError> {
    if bytes.starts_with(&MAGIC) {
        decode_binary(bytes)
    } else if bytes.first() == Some(&b'{') {
        decode_jsonl(bytes)
    } else {
        Err(StoreError::MagicMismatch(bytes.iter().take(4).copied().collect()))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        buf
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

fn decode_binary(bytes: &[u8]) -> Result<TrajectoryLog, StoreError> {
    if bytes.len() < HEADER_LEN {
        return Err(StoreError::TruncatedFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = cur.u32();
    if version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let n = cur.u64();
    let c = cur.u32() as u64;
    let t_count = cur.u32() as u64;
    let run_seed = cur.u64();
    if t_count == 0 {
        return Err(StoreError::Format("a log needs at least one epoch (T >= 1)".into()));
    }

    // Saturating so absurd headers fail as truncation instead of overflowing.
    let expected = (HEADER_LEN as u64)
        .saturating_add(n.saturating_mul(12))
        .saturating_add(t_count.saturating_mul(n.saturating_mul(c).saturating_mul(4).saturating_add(4)));
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(StoreError::TruncatedFile { expected, actual });
    }
    if actual > expected {
        return Err(StoreError::Format(format!(
            "{} trailing bytes after last epoch block",
            actual - expected
        )));
    }
    let (n, c, t_count) = (n as usize, c as usize, t_count as usize);

    let sample_ids: Vec<u64> = (0..n).map(|_| cur.u64()).collect();
    let labels: Vec<u32> = (0..n).map(|_| cur.u32()).collect();
    let mut logits = Vec::with_capacity(t_count * n * c);
    for t in 1..=t_count {
        let epoch = cur.u32() as usize;
        if epoch != t {
            return Err(StoreError::EpochGap {
                expected: t,
                found: epoch,
            });
        }
        logits.extend((0..n * c).map(|_| cur.f32()));
    }

    let log = TrajectoryLog {
        sample_ids,
        labels,
        n_classes: c,
        n_epochs: t_count,
        logits,
        run_seed,
        schema_version: version,
    };
    log.check()?;
    Ok(log)
}

fn decode_jsonl(bytes: &[u8]) -> Result<TrajectoryLog, StoreError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StoreError::Format(e.to_string()))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| StoreError::Format("empty JSONL log".into()))?;
    let header: JsonHeader =
        serde_json::from_str(first).map_err(|e| StoreError::Json { line: 1, source: e })?;
    if header.version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion(header.version));
    }
    if header.n_epochs == 0 {
        return Err(StoreError::Format("a log needs at least one epoch (T >= 1)".into()));
    }
    let n = header.n_samples as usize;
    let c = header.n_classes as usize;
    let t_count = header.n_epochs as usize;
    let expected_records = (t_count as u64).saturating_mul(n as u64);

    // Capacities are capped: the header is untrusted until the records arrive.
    let mut sample_ids = Vec::with_capacity(n.min(1 << 16));
    let mut labels = Vec::with_capacity(n.min(1 << 16));
    let mut logits = Vec::with_capacity(t_count.saturating_mul(n).saturating_mul(c).min(1 << 20));
    let mut count: u64 = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if count == expected_records {
            return Err(StoreError::Format(format!(
                "line {line_no}: more records than the header declares"
            )));
        }
        let rec: JsonRecord =
            serde_json::from_str(line).map_err(|e| StoreError::Json { line: line_no, source: e })?;
        if n == 0 {
            return Err(StoreError::Format("header declares zero samples".into()));
        }
        let t = (count / n as u64) as usize + 1;
        let i = (count % n as u64) as usize;
        if rec.epoch != t {
            return Err(StoreError::EpochGap {
                expected: t,
                found: rec.epoch,
            });
        }
        if rec.logits.len() != c {
            return Err(StoreError::Format(format!(
                "line {line_no}: {} logits, expected {c}",
                rec.logits.len()
            )));
        }
        if t == 1 {
            sample_ids.push(rec.sample_id);
            labels.push(rec.label);
        } else if sample_ids[i] != rec.sample_id || labels[i] != rec.label {
            return Err(StoreError::Format(format!(
                "line {line_no}: sample order or label differs from epoch 1"
            )));
        }
        logits.extend_from_slice(&rec.logits);
        count += 1;
    }
    if count < expected_records {
        return Err(StoreError::TruncatedFile {
            expected: expected_records,
            actual: count,
        });
    }

    let log = TrajectoryLog {
        sample_ids,
        labels,
        n_classes: c,
        n_epochs: t_count,
        logits,
        run_seed: header.run_seed,
        schema_version: header.version,
    };
    log.check()?;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TrajectoryLog {
        TrajectoryLog::from_parts(
            vec![10, 11],
            vec![0, 2],
            3,
            vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.25],
            99,
        )
        .unwrap()
    }

    #[test]
    fn dimensions_survive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ltrj");
        write_log(&toy(), &path, LogFormat::Binary).unwrap();
        let back = open_log(&path).unwrap();
        assert_eq!((back.n_samples(), back.n_classes, back.n_epochs), (2, 3, 1));
        assert_eq!(back, toy());
    }

    #[test]
    fn rejects_foreign_magic() {
        let err = decode(b"XXXX\x01\x00\x00\x00").unwrap_err();
        assert!(matches!(err, StoreError::MagicMismatch(_)));
    }

    #[test]
    fn byte_count_matches_layout() {
        let log = TrajectoryLog::from_parts(vec![7], vec![1], 2, vec![0.1, 0.2, 0.3, 0.4], 0).unwrap();
        let mut buf = Vec::new();
        encode_binary(&log, &mut buf).unwrap();
        // header + one id + one label + 2 x (epoch index + 1x2 f32)
        assert_eq!(buf.len(), 32 + 8 + 4 + 2 * (4 + 2 * 4));
        assert_eq!(buf.len(), binary_len(1, 2, 2));
    }

    #[test]
    fn zero_epochs_cannot_be_written() {
        let mut log = toy();
        log.logits.clear();
        log.n_epochs = 0;
        let dir = tempfile::tempdir().unwrap();
        let err = write_log(&log, &dir.path().join("x"), LogFormat::Binary).unwrap_err();
        assert!(matches!(err, StoreError::Format(_)));
    }

    #[test]
    fn truncated_binary() {
        let mut buf = Vec::new();
        encode_binary(&toy(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(decode(&buf), Err(StoreError::TruncatedFile { .. })));
        assert!(matches!(decode(&buf[..10]), Err(StoreError::TruncatedFile { .. })));
    }

    #[test]
    fn huge_declared_counts_are_truncation() {
        let mut buf = Vec::new();
        encode_binary(&toy(), &mut buf).unwrap();
        buf[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&buf), Err(StoreError::TruncatedFile { .. })));
    }

    #[test]
    fn nan_rejected_at_read() {
        let mut buf = Vec::new();
        encode_binary(&toy(), &mut buf).unwrap();
        let off = binary_len(2, 3, 1) - 4;
        buf[off..].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode(&buf) {
            Err(StoreError::NonFinite { sample_id, epoch }) => assert_eq!((sample_id, epoch), (11, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected_at_read() {
        let mut log = toy();
        log.sample_ids[1] = 10;
        let mut buf = Vec::new();
        encode_binary(&log, &mut buf).unwrap();
        assert!(matches!(decode(&buf), Err(StoreError::DuplicateSampleId(10))));
    }

    #[test]
    fn epoch_gap_rejected() {
        let log = TrajectoryLog::from_parts(vec![1], vec![0], 2, vec![0.0; 4], 0).unwrap();
        let mut buf = Vec::new();
        encode_binary(&log, &mut buf).unwrap();
        // second epoch index field sits after header, id, label and the first epoch block
        let off = 32 + 8 + 4 + 4 + 8;
        buf[off..off + 4].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            decode(&buf),
            Err(StoreError::EpochGap { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn jsonl_matches_binary() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ltrj");
        let b = dir.path().join("b.jsonl");
        write_log(&toy(), &a, LogFormat::Binary).unwrap();
        write_log(&toy(), &b, LogFormat::Jsonl).unwrap();
        assert_eq!(open_log(&a).unwrap(), open_log(&b).unwrap());
    }

    #[test]
    fn jsonl_errors() {
        let header = r#"{"version":1,"n_samples":1,"n_classes":2,"n_epochs":2,"run_seed":0}"#;
        let e1 = r#"{"epoch":1,"sample_id":5,"label":0,"logits":[0.0,1.0]}"#;
        let e3 = r#"{"epoch":3,"sample_id":5,"label":0,"logits":[0.0,1.0]}"#;
        let short = format!("{header}\n{e1}\n");
        assert!(matches!(decode(short.as_bytes()), Err(StoreError::TruncatedFile { .. })));
        let gap = format!("{header}\n{e1}\n{e3}\n");
        assert!(matches!(decode(gap.as_bytes()), Err(StoreError::EpochGap { .. })));
        let nan = format!("{header}\n{e1}\n{}\n", r#"{"epoch":2,"sample_id":5,"label":0,"logits":[0.0,null]}"#);
        assert!(decode(nan.as_bytes()).is_err());
    }

    #[test]
    fn validate_reports_each_problem() {
        assert!(validate(&toy()).ok);
        assert!(validate(&toy()).issues.is_empty());

        let mut bad = toy();
        bad.labels[0] = 3;
        let report = validate(&bad);
        assert!(!report.ok);
        assert_eq!(report.count(IssueCode::LabelOutOfRange), 1);

        let mut bad = toy();
        bad.logits[4] = f32::NAN;
        let report = validate(&bad);
        assert_eq!(
            report.issues[0].location,
            IssueLocation::SampleEpoch { sample_id: 11, epoch: 1 }
        );
        assert_eq!(report.issues[0].code, IssueCode::NonFinite);
    }

    #[test]
    fn trajectory_view_is_strided() {
        let log = TrajectoryLog::from_parts(
            vec![1, 2],
            vec![0, 1],
            2,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            0,
        )
        .unwrap();
        let rows: Vec<&[f32]> = log.trajectory(1).collect();
        assert_eq!(rows, vec![&[3.0, 4.0][..], &[7.0, 8.0][..]]);
    }
}
