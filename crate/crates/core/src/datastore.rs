//! On-disk formats shared by every stage.
//!
//! All record files are line-delimited JSON objects, one record per line.
//! Blank lines are ignored; every other line must parse or the whole load
//! fails with an error naming the 1-based line number. Nothing partial is
//! ever returned.
//!
//! Embeddings are stored either inline as a number array or, for large
//! sets, in a binary sidecar referenced from the record:
//!
//! ```text
//! {"id":"q1","split":"test","embedding_ref":{"path":"emb.bin","row":0}}
//! ```
//!
//! The sidecar layout is an 8-byte magic `THRUSTEM`, the dimension as a
//! little-endian `u32`, the row count as a little-endian `u64`, then
//! `count * dim` little-endian IEEE-754 `f32` values in row-major order.
//! Sidecar paths are resolved relative to the directory of the samples file.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::QueryScore;

/// Label assigned to every sample of a task without class labels.
pub const DUMMY_LABEL: &str = "_gen";

pub const SIDECAR_MAGIC: &[u8; 8] = b"THRUSTEM";
const SIDECAR_HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Calibration,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedSample {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub split: Split,
    pub embedding: Vec<f64>,
}

impl EmbeddedSample {
    /// The class this sample is clustered under; unlabeled samples share
    /// [`DUMMY_LABEL`].
    pub fn class_label(&self) -> &str {
        self.label.as_deref().unwrap_or(DUMMY_LABEL)
    }
}

/// A validated, immutable collection of embedded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    task_id: String,
    dim: usize,
    samples: Vec<EmbeddedSample>,
    label_set: Vec<String>,
}

impl SampleSet {
    /// Validates dimensions, finiteness and id uniqueness. Errors carry the
    /// 1-based position of the offending sample as the line number.
    pub fn new(task_id: impl Into<String>, samples: Vec<EmbeddedSample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("sample set"))?;
        let dim = first.embedding.len();
        if dim == 0 {
            return Err(Error::Malformed {
                line: 1,
                message: "embedding is empty".into(),
            });
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for (i, sample) in samples.iter().enumerate() {
            let line = i + 1;
            if sample.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    line,
                    expected: dim,
                    found: sample.embedding.len(),
                });
            }
            if sample.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { line });
            }
            if !seen.insert(sample.id.as_str()) {
                return Err(Error::DuplicateId {
                    line,
                    id: sample.id.clone(),
                });
            }
        }
        let label_set = distinct_labels(&samples);
        Ok(Self {
            task_id: task_id.into(),
            dim,
            samples,
            label_set,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[EmbeddedSample] {
        &self.samples
    }

    /// Distinct class labels in order of first appearance.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &EmbeddedSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Restricts the set to one split. Returns `None` when the split is empty.
    pub fn only(&self, split: Split) -> Option<SampleSet> {
        let samples: Vec<_> = self.iter_split(split).cloned().collect();
        if samples.is_empty() {
            return None;
        }
        let label_set = distinct_labels(&samples);
        Some(SampleSet {
            task_id: self.task_id.clone(),
            dim: self.dim,
            samples,
            label_set,
        })
    }
}

fn distinct_labels(samples: &[EmbeddedSample]) -> Vec<String> {
    let mut seen = HashSet::new();
    samples
        .iter()
        .map(EmbeddedSample::class_label)
        .filter(|l| seen.insert(*l))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Classification,
    Generation,
}

/// Cached predictions of both inference branches for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub id: String,
    pub gold_answers: Vec<String>,
    pub pred_without: String,
    pub pred_with: String,
    pub task_type: TaskType,
}

#[derive(Debug, Deserialize)]
struct SampleRecord {
    id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    label: Option<String>,
    split: Split,
    #[serde(default)]
    embedding: Option<Vec<Option<f64>>>,
    #[serde(default)]
    embedding_ref: Option<EmbeddingRef>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingRef {
    path: PathBuf,
    row: usize,
}

/// Loads and validates a samples file. The task id is the file stem.
pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let task_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_samples(BufReader::new(file), task_id, base_dir, path)
}

fn parse_samples(
    reader: impl BufRead,
    task_id: String,
    base_dir: &Path,
    source: &Path,
) -> Result<SampleSet> {
    let mut sidecars: HashMap<PathBuf, Sidecar> = HashMap::new();
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    let mut dim = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = parse_line(&sanitize_non_finite(&line), line_no)?;
        let embedding = match (record.embedding, record.embedding_ref) {
            (Some(values), None) => values
                .into_iter()
                .map(|v| v.filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or(Error::NonFinite { line: line_no })?,
            (None, Some(r)) => {
                let full = base_dir.join(&r.path);
                if !sidecars.contains_key(&full) {
                    let sc = read_sidecar(&full)?;
                    sidecars.insert(full.clone(), sc);
                }
                let sc = &sidecars[&full];
                let row = sc.row(r.row).ok_or_else(|| Error::Malformed {
                    line: line_no,
                    message: format!("row {} out of range for sidecar {}", r.row, r.path.display()),
                })?;
                let row: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { line: line_no });
                }
                row
            }
            (Some(_), Some(_)) => {
                return Err(Error::Malformed {
                    line: line_no,
                    message: "both embedding and embedding_ref given".into(),
                })
            }
            (None, None) => {
                return Err(Error::Malformed {
                    line: line_no,
                    message: "missing embedding".into(),
                })
            }
        };
        if embedding.is_empty() {
            return Err(Error::Malformed {
                line: line_no,
                message: "embedding is empty".into(),
            });
        }
        let expected = *dim.get_or_insert(embedding.len());
        if embedding.len() != expected {
            return Err(Error::DimensionMismatch {
                line: line_no,
                expected,
                found: embedding.len(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        samples.push(EmbeddedSample {
            id: record.id,
            text: record.text,
            label: record.label,
            split: record.split,
            embedding,
        });
    }
    SampleSet::new(task_id, samples)
}

pub fn write_samples(path: impl AsRef<Path>, set: &SampleSet) -> Result<()> {
    write_jsonl(path, set.samples())
}

pub fn load_outcomes(path: impl AsRef<Path>) -> Result<Vec<OutcomeRecord>> {
    let records: Vec<(usize, OutcomeRecord)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, record) in records {
        if record.gold_answers.is_empty() {
            return Err(Error::EmptyGoldAnswers { line });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                line,
                id: record.id,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_outcomes(path: impl AsRef<Path>, outcomes: &[OutcomeRecord]) -> Result<()> {
    write_jsonl(path, outcomes)
}

/// Writes one `{id, score}` record per line. Every score is checked before
/// the file is touched.
pub fn write_scores(path: impl AsRef<Path>, scores: &[QueryScore]) -> Result<()> {
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore { id: bad.id.clone() });
    }
    write_jsonl(path, scores)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<QueryScore>> {
    let records: Vec<(usize, QueryScore)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, record) in records {
        if !record.score.is_finite() {
            return Err(Error::NonFinite { line });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                line,
                id: record.id,
            });
        }
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct IdOnly {
    id: String,
}

/// Reads the `id` field of every record in any line-delimited file.
pub fn load_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let records: Vec<(usize, IdOnly)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|(line, r)| {
            if seen.insert(r.id.clone()) {
                Ok(r.id)
            } else {
                Err(Error::DuplicateId { line, id: r.id })
            }
        })
        .collect()
}

/// Reads every non-blank line as a `T`, keeping its line number.
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<(usize, T)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((idx + 1, parse_line(&line, idx + 1)?));
    }
    Ok(out)
}

fn parse_line<T: DeserializeOwned>(line: &str, line_no: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Malformed {
        line: line_no,
        message: e.to_string(),
    })
}

pub(crate) fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record).expect("records serialize to JSON");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value).expect("value serializes to JSON");
    buf.push(b'\n');
    write_atomic(path, &buf)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Malformed {
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(bytes)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Rows of a binary embedding sidecar, held as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub dim: usize,
    pub values: Vec<f32>,
}

impl Sidecar {
    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, row: usize) -> Option<&[f32]> {
        let start = row.checked_mul(self.dim)?;
        self.values.get(start..start + self.dim)
    }
}

pub fn write_sidecar(path: impl AsRef<Path>, dim: usize, rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let dim32 = u32::try_from(dim)
        .map_err(|_| Error::InvalidArgument(format!("dimension {dim} too large")))?;
    if dim == 0 {
        return Err(Error::InvalidArgument("sidecar dimension must be positive".into()));
    }
    let mut buf = Vec::with_capacity(SIDECAR_HEADER_LEN + rows.len() * dim * 4);
    buf.extend_from_slice(SIDECAR_MAGIC);
    buf.extend_from_slice(&dim32.to_le_bytes());
    buf.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                line: i + 1,
                expected: dim,
                found: row.len(),
            });
        }
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Sidecar {
        path: path.to_owned(),
        message: message.to_owned(),
    };
    if bytes.len() < SIDECAR_HEADER_LEN || &bytes[..8] != SIDECAR_MAGIC {
        return Err(bad("missing header"));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(bad("zero dimension"));
    }
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dim))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("header overflows"))?;
    let body = &bytes[SIDECAR_HEADER_LEN..];
    if body.len() != expected {
        return Err(bad("body length does not match header"));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Sidecar { dim, values })
}

/// Rewrites bare `NaN` / `Infinity` / `-Infinity` tokens outside string
/// literals as `null` so they surface as non-finite values instead of
/// generic parse errors.
fn sanitize_non_finite(line: &str) -> std::borrow::Cow<'_, str> {
    const TOKENS: [&str; 4] = ["-Infinity", "+Infinity", "Infinity", "NaN"];
    if !TOKENS.iter().any(|t| line.contains(t)) {
        return line.into();
    }
    let mut out = String::with_capacity(line.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
        } else if let Some(t) = TOKENS.iter().find(|t| rest.starts_with(**t)) {
            out.push_str("null");
            rest = &rest[t.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out.into()
}
