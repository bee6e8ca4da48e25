//! On-disk corpus layout: one JSON record per line in `news.jsonl`,
//! `interactions.jsonl`, `companies.jsonl` and `scenarios.jsonl`, plus a
//! `manifest.json` carrying the corpus version and record counts.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use finbias_core::corpus::{RecordKind, Violation};
use finbias_core::Corpus;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub news: usize,
    pub interactions: usize,
    pub companies: usize,
    pub scenarios: usize,
}

impl RecordCounts {
    pub fn of(corpus: &Corpus) -> Self {
        RecordCounts {
            news: corpus.news.len(),
            interactions: corpus.interactions.len(),
            companies: corpus.companies.len(),
            scenarios: corpus.scenarios.len(),
        }
    }

    fn get(&self, kind: RecordKind) -> usize {
        match kind {
            RecordKind::News => self.news,
            RecordKind::Interaction => self.interactions,
            RecordKind::Company => self.companies,
            RecordKind::Scenario => self.scenarios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_version: String,
    pub counts: RecordCounts,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest {path}: {message}")]
    BadManifest { path: PathBuf, message: String },
    #[error("{file}:{line}: record `{record}`: {message}")]
    Schema { file: String, line: usize, record: String, message: String },
    #[error("manifest declares {declared} {kind} records, found {found}")]
    CountMismatch { kind: &'static str, declared: usize, found: usize },
    #[error("{} invariant violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io { path: path.to_path_buf(), source }
}

fn file_name(kind: RecordKind) -> String {
    format!("{}.jsonl", kind.as_str())
}

fn read_lines<T: DeserializeOwned>(dir: &Path, kind: RecordKind) -> Result<Vec<T>, CorpusIoError> {
    let path = dir.join(file_name(kind));
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(&path).map_err(io_err(&path))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |record: String, message: String| CorpusIoError::Schema {
            file: file_name(kind),
            line: i + 1,
            record,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| schema("?".into(), e.to_string()))?;
        let id = value.get("id").and_then(|v| v.as_str()).unwrap_or("?").to_string();
        out.push(serde_json::from_value(value).map_err(|e| schema(id, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest, CorpusIoError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(CorpusIoError::MissingManifest(path));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| CorpusIoError::BadManifest { path, message: e.to_string() })
}

/// Parse every file without checking record invariants. Counts are checked
/// against the manifest.
pub fn read_corpus(dir: &Path) -> Result<(CorpusManifest, Corpus), CorpusIoError> {
    let manifest = read_manifest(dir)?;
    let corpus = Corpus {
        version: manifest.corpus_version.clone(),
        news: read_lines(dir, RecordKind::News)?,
        interactions: read_lines(dir, RecordKind::Interaction)?,
        companies: read_lines(dir, RecordKind::Company)?,
        scenarios: read_lines(dir, RecordKind::Scenario)?,
    };
    let found = RecordCounts::of(&corpus);
    for kind in [RecordKind::News, RecordKind::Interaction, RecordKind::Company, RecordKind::Scenario] {
        if found.get(kind) != manifest.counts.get(kind) {
            return Err(CorpusIoError::CountMismatch {
                kind: kind.as_str(),
                declared: manifest.counts.get(kind),
                found: found.get(kind),
            });
        }
    }
    Ok((manifest, corpus))
}

/// Read and validate; any invariant violation rejects the corpus.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusIoError> {
    let (_, corpus) = read_corpus(dir)?;
    let violations = corpus.validate();
    if !violations.is_empty() {
        return Err(CorpusIoError::Invalid(violations));
    }
    Ok(corpus)
}

fn write_lines<T: Serialize>(dir: &Path, kind: RecordKind, items: &[T]) -> Result<(), CorpusIoError> {
    let path = dir.join(file_name(kind));
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
    for item in items {
        let line = serde_json::to_string(item).expect("corpus records serialize");
        writeln!(w, "{line}").map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CorpusIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_lines(dir, RecordKind::News, &corpus.news)?;
    write_lines(dir, RecordKind::Interaction, &corpus.interactions)?;
    write_lines(dir, RecordKind::Company, &corpus.companies)?;
    write_lines(dir, RecordKind::Scenario, &corpus.scenarios)?;
    let manifest = CorpusManifest { corpus_version: corpus.version.clone(), counts: RecordCounts::of(corpus) };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))
}
