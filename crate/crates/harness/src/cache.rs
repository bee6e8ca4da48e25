//! Append-only response cache. Each file holds one JSON record per line;
//! unreadable lines are skipped on load and counted.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const COMPLETIONS_FILE: &str = "completions.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";

#[derive(Debug, thiserror::Error)]
#[error("cache {path}: {source}")]
pub struct CacheError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub key: String,
    pub model_id: String,
    /// Sampling parameters the completion was produced under.
    pub params: serde_json::Value,
    pub text: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub key: String,
    pub model_id: String,
    pub vector: Vec<f64>,
    pub timestamp: u64,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Hex SHA-256 of the canonical JSON encoding of `parts`.
pub fn digest<T: Serialize + ?Sized>(parts: &T) -> String {
    let bytes = serde_json::to_vec(parts).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

struct Store<R> {
    path: PathBuf,
    entries: HashMap<String, R>,
    file: File,
    corrupt: usize,
}

impl<R: DeserializeOwned + Serialize + Clone> Store<R> {
    fn open(path: PathBuf, key: fn(&R) -> &str) -> Result<Self, CacheError> {
        let err = |source| CacheError { path: path.clone(), source };
        let mut entries = HashMap::new();
        let mut corrupt = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(err)?);
            for line in reader.split(b'\n') {
                let line = line.map_err(err)?;
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                match serde_json::from_slice::<R>(&line) {
                    Ok(r) => {
                        entries.insert(key(&r).to_string(), r);
                    }
                    Err(_) => corrupt += 1,
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path).map_err(err)?;
        // A torn final line must not swallow the next record.
        let len = file.metadata().map_err(err)?.len();
        if len > 0 {
            let mut last = [0u8];
            file.seek(SeekFrom::Start(len - 1)).map_err(err)?;
            file.read_exact(&mut last).map_err(err)?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(err)?;
            }
        }
        Ok(Store { path, entries, file, corrupt })
    }

    fn put(&mut self, key: String, record: R) -> Result<(), CacheError> {
        let mut line = serde_json::to_vec(&record).expect("cache records serialize");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| CacheError { path: self.path.clone(), source })?;
        self.entries.insert(key, record);
        Ok(())
    }
}

/// Thread-safe cache; every write goes through one lock per file.
pub struct Cache {
    dir: PathBuf,
    completions: Mutex<Store<CompletionRecord>>,
    embeddings: Mutex<Store<EmbeddingRecord>>,
}

impl Cache {
    pub fn open(dir: &Path) -> Result<Self, CacheError> {
        fs::create_dir_all(dir).map_err(|source| CacheError { path: dir.into(), source })?;
        Ok(Cache {
            dir: dir.to_path_buf(),
            completions: Mutex::new(Store::open(dir.join(COMPLETIONS_FILE), |r: &CompletionRecord| &r.key)?),
            embeddings: Mutex::new(Store::open(dir.join(EMBEDDINGS_FILE), |r: &EmbeddingRecord| &r.key)?),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn completion(&self, key: &str) -> Option<CompletionRecord> {
        self.completions.lock().expect("cache lock").entries.get(key).cloned()
    }

    pub fn put_completion(&self, record: CompletionRecord) -> Result<(), CacheError> {
        self.completions.lock().expect("cache lock").put(record.key.clone(), record)
    }

    pub fn embedding(&self, key: &str) -> Option<Vec<f64>> {
        self.embeddings.lock().expect("cache lock").entries.get(key).map(|r| r.vector.clone())
    }

    pub fn put_embedding(&self, record: EmbeddingRecord) -> Result<(), CacheError> {
        self.embeddings.lock().expect("cache lock").put(record.key.clone(), record)
    }

    /// Lines skipped as unreadable when the cache was opened.
    pub fn corrupt_lines(&self) -> usize {
        self.completions.lock().expect("cache lock").corrupt + self.embeddings.lock().expect("cache lock").corrupt
    }

    pub fn completion_count(&self) -> usize {
        self.completions.lock().expect("cache lock").entries.len()
    }
}
