//! File formats.
//!
//! Datasets are read from CSV (header `p0,...,p{K-1},label`) or JSON lines
//! (`{"probs": [...], "label": k}`). Outputs are JSON documents, JSON lines,
//! or CSV, and are written atomically through a temporary file in the target
//! directory.

use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dataset::{LabeledProbabilityDataset, LabeledRow, ProbabilityVector};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guesses from the file extension (`.jsonl`/`.ndjson`, else CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => DataFormat::Jsonl,
            _ => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Clip negatives and rescale instead of rejecting off-simplex rows.
    pub renormalize: bool,
}

pub fn load_dataset<T: Real>(
    path: &Path,
    format: DataFormat,
    opts: LoadOptions,
) -> Result<LabeledProbabilityDataset<T>> {
    let text = std::fs::read_to_string(path)?;
    match format {
        DataFormat::Csv => parse_csv(&text, opts),
        DataFormat::Jsonl => parse_jsonl(&text, opts),
    }
}

pub fn parse_csv<T: Real>(text: &str, opts: LoadOptions) -> Result<LabeledProbabilityDataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let k = check_header(&header)?;
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(row + 2);
        if record.len() != k + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", k + 1, record.len()),
            });
        }
        let probs = record
            .iter()
            .take(k)
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        let label = record[k].parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("label {:?}: {e}", &record[k]),
        })?;
        rows.push(make_row(probs, label, row, opts)?);
    }
    LabeledProbabilityDataset::new(k, rows)
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let n = header.len();
    let bad = |message: String| Error::Parse { line: 1, message };
    if n < 3 {
        return Err(bad(format!(
            "header needs at least p0,p1,label; found {n} columns"
        )));
    }
    for (i, name) in header.iter().take(n - 1).enumerate() {
        if name != format!("p{i}") {
            return Err(bad(format!("column {i} must be \"p{i}\", found {name:?}")));
        }
    }
    if &header[n - 1] != "label" {
        return Err(bad(format!(
            "last column must be \"label\", found {:?}",
            &header[n - 1]
        )));
    }
    Ok(n - 1)
}

#[derive(Deserialize)]
struct JsonRow {
    probs: Vec<f64>,
    label: usize,
}

pub fn parse_jsonl<T: Real>(text: &str, opts: LoadOptions) -> Result<LabeledProbabilityDataset<T>> {
    let mut rows = Vec::new();
    let mut k = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: JsonRow = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let expected = *k.get_or_insert(parsed.probs.len());
        if parsed.probs.len() != expected {
            return Err(Error::ClassMismatch {
                expected,
                found: parsed.probs.len(),
            }
            .at_row(rows.len()));
        }
        let row = rows.len();
        rows.push(make_row(parsed.probs, parsed.label, row, opts)?);
    }
    let k = k.ok_or(Error::Empty("no rows in JSON lines input"))?;
    LabeledProbabilityDataset::new(k, rows)
}

fn make_row<T: Real>(
    probs: Vec<f64>,
    label: usize,
    row: usize,
    opts: LoadOptions,
) -> Result<LabeledRow<T>> {
    let probs: Vec<T> = probs.into_iter().map(T::lit).collect();
    let probs = if opts.renormalize {
        ProbabilityVector::renormalized(probs)
    } else {
        ProbabilityVector::new(probs)
    }
    .map_err(|e| e.at_row(row))?;
    Ok(LabeledRow { probs, label })
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("{field:?}: {e}"),
    })
}

/// Serializes a dataset back to the CSV layout accepted by [`parse_csv`].
pub fn dataset_to_csv<T: Real>(ds: &LabeledProbabilityDataset<T>) -> String {
    let k = ds.num_classes();
    let mut out: String = (0..k).map(|i| format!("p{i},")).collect();
    out.push_str("label\n");
    for row in ds.rows() {
        for p in row.probs.as_slice() {
            out.push_str(&format!("{p},"));
        }
        out.push_str(&format!("{}\n", row.label));
    }
    out
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Parses JSON lines, skipping blank lines; errors carry the line number.
pub fn read_jsonl<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_json_pretty<S: Serialize>(value: &S) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn to_jsonl<S: Serialize>(items: &[S]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, item)?;
        bytes.push(b'\n');
    }
    Ok(bytes)
}

pub fn to_csv<S: Serialize>(items: &[S]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for item in items {
        w.serialize(item)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `bytes` to a temporary file beside `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_single_row() {
        let ds = parse_csv::<f64>("p0,p1,label\n0.7,0.3,0\n", LoadOptions::default()).unwrap();
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rows()[0].label, 0);
    }

    #[test]
    fn csv_rejects_bad_sum_unless_renormalized() {
        let text = "p0,p1,label\n0.5,0.5,1\n0.6,0.3,0\n";
        let err = parse_csv::<f64>(text, LoadOptions::default()).unwrap_err();
        assert_eq!(err.row(), Some(1));
        assert_eq!(err.code(), "invalid_probabilities");
        let ds = parse_csv::<f64>(text, LoadOptions { renormalize: true }).unwrap();
        assert!((ds.rows()[1].probs.as_slice()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_parse_errors_carry_line() {
        let err = parse_csv::<f64>(
            "p0,p1,label\n0.5,0.5,0\n0.5,abc,1\n",
            LoadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.line(), Some(3));
        let err = parse_csv::<f64>("a,b,label\n", LoadOptions::default()).unwrap_err();
        assert_eq!(err.line(), Some(1));
        let err = parse_csv::<f64>("p0,p1,label\n0.5,0.5\n", LoadOptions::default()).unwrap_err();
        assert!(err.line().is_some());
    }

    #[test]
    fn jsonl_matches_csv() {
        let csv = "p0,p1,p2,label\n0.7,0.2,0.1,2\n0.9,0.05,0.05,0\n";
        let jsonl =
            "{\"probs\":[0.7,0.2,0.1],\"label\":2}\n\n{\"probs\":[0.9,0.05,0.05],\"label\":0}\n";
        let a = parse_csv::<f64>(csv, LoadOptions::default()).unwrap();
        let b = parse_jsonl::<f64>(jsonl, LoadOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            parse_csv::<f64>(&dataset_to_csv(&a), LoadOptions::default()).unwrap(),
            a
        );
    }

    #[test]
    fn jsonl_errors() {
        let err = parse_jsonl::<f64>(
            "{\"probs\":[0.5,0.5],\"label\":0}\nnot json\n",
            LoadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.line(), Some(2));
        let err = parse_jsonl::<f64>(
            "{\"probs\":[0.5,0.5],\"label\":0}\n{\"probs\":[0.5,0.25,0.25],\"label\":0}\n",
            LoadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.code(), "class_mismatch");
        assert!(parse_jsonl::<f64>("", LoadOptions::default()).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
    }
}
