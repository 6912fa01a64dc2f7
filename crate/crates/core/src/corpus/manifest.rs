//! JSON-lines corpus manifests.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),
    #[error("utterance {id:?} references missing file {path}")]
    MissingFile { id: String, path: String },
    #[error("utterance {0:?} is recorded but carries a degradation value")]
    LabelMismatch(String),
    #[error("manifest i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Recorded,
    Synthetic,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Recorded => "recorded",
            Label::Synthetic => "synthetic",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recorded" => Ok(Label::Recorded),
            "synthetic" => Ok(Label::Synthetic),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One manifest line.
///
/// `base_id`/`base_path` are written by the simulator for synthetic items and
/// point at the clean waveform the item was degraded from; real corpora omit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    pub label: Label,
    pub path: String,
    pub sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    pub records: Vec<UtteranceRecord>,
    pub root: PathBuf,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    pub fn audio_path(&self, record: &UtteranceRecord) -> PathBuf {
        self.resolve(&record.path)
    }
}

fn check_record(record: &UtteranceRecord, line: usize) -> Result<(), ManifestError> {
    let bad = |reason: &str| ManifestError::ParseError {
        line,
        reason: reason.to_string(),
    };
    if record.id.is_empty() {
        return Err(bad("empty id"));
    }
    if record.path.is_empty() {
        return Err(bad("empty path"));
    }
    if record.sample_rate == 0 {
        return Err(bad("sample_rate must be positive"));
    }
    if let Some(d) = record.degradation {
        if record.label == Label::Recorded {
            return Err(ManifestError::LabelMismatch(record.id.clone()));
        }
        if !(0.0..=1.0).contains(&d) {
            return Err(bad("degradation outside [0, 1]"));
        }
    }
    Ok(())
}

/// Parse manifest text without touching the file system.
pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>, ManifestError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: UtteranceRecord = serde_json::from_str(raw).map_err(|e| ManifestError::ParseError {
            line,
            reason: e.to_string(),
        })?;
        check_record(&record, line)?;
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Read a manifest and verify that every referenced file exists.
/// Paths inside the manifest are relative to the manifest's directory.
pub fn scan_corpus(manifest_path: impl AsRef<Path>) -> Result<CorpusIndex, ManifestError> {
    let manifest_path = manifest_path.as_ref();
    let io_err = |source| ManifestError::Io {
        path: manifest_path.display().to_string(),
        source,
    };
    let file = fs::File::open(manifest_path).map_err(io_err)?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(io_err)?);
        text.push('\n');
    }
    let records = parse_manifest(&text)?;
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    for r in &records {
        for p in std::iter::once(&r.path).chain(r.base_path.as_ref()) {
            if !root.join(p).is_file() {
                return Err(ManifestError::MissingFile {
                    id: r.id.clone(),
                    path: p.clone(),
                });
            }
        }
    }
    Ok(CorpusIndex { records, root })
}

pub fn manifest_to_string(records: &[UtteranceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(manifest_to_string(records).as_bytes()).map_err(io_err)
}
