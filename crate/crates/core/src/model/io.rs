//! Line-delimited JSON persistence for every record type.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::query::EditQuery;
use super::record::{MetricVector, SampleResult};
use super::scene::ImageRecord;
use super::votes::PreferenceRecord;
use crate::error::{Error, Result};

/// A record that can check its own invariants.
pub trait Record: Serialize + DeserializeOwned {
    fn validate(&self) -> Result<()>;
}

impl Record for EditQuery {
    fn validate(&self) -> Result<()> {
        EditQuery::validate(self)
    }
}

impl Record for MetricVector {
    fn validate(&self) -> Result<()> {
        MetricVector::validate(self)
    }
}

impl Record for SampleResult {
    fn validate(&self) -> Result<()> {
        SampleResult::validate(self)
    }
}

impl Record for PreferenceRecord {
    fn validate(&self) -> Result<()> {
        PreferenceRecord::validate(self)
    }
}

impl Record for ImageRecord {
    fn validate(&self) -> Result<()> {
        ImageRecord::validate(self)
    }
}

/// Serializes one record per line. Nothing is written if any record is invalid.
pub fn to_jsonl<T: Record>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        r.validate()?;
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn save_records<T: Record>(records: &[T], path: &Path) -> Result<()> {
    let text = to_jsonl(records)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_records<T: Record>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        rec.validate()
            .map_err(|e| Error::invariant(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes plain serializable rows (reports, manifests) without validation.
pub fn save_jsonl_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).expect("row serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_jsonl_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}
