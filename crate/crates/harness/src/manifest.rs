//! Run manifest: the parameters that determine a run's outputs, a digest
//! over them, and completion statistics.

use std::path::Path;

use finbias_core::parse::ParseStats;
use finbias_core::prompting::TEMPLATE_VERSION;
use finbias_core::topics::STOPWORDS_VERSION;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cache::digest;
use crate::config::{ConfigError, RunConfig};

pub const RUN_MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub attempted: usize,
    pub parsed: usize,
    pub failed: usize,
    /// Outcomes of cells that produced a model response.
    pub parse: ParseStats,
    /// Cells whose request never produced a response.
    pub gateway_errors: usize,
    /// Cells whose prompt could not be rendered.
    pub prompt_errors: usize,
}

impl RunStats {
    pub fn failure_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.failed as f64 / self.attempted as f64
        }
    }

    /// `attempted = parsed + failed` and the parse tally is closed.
    pub fn is_consistent(&self) -> bool {
        self.attempted == self.parsed + self.failed
            && self.parse.is_consistent()
            && self.failed == self.parse.failed() + self.gateway_errors + self.prompt_errors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub corpus_version: String,
    pub template_version: String,
    pub stopwords_version: String,
    pub digest: String,
    pub config: RunConfig,
    pub started_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<RunStats>,
}

/// Everything that can change emitted numbers, without paths, secrets or
/// timestamps.
pub fn reproducibility_fields(cfg: &RunConfig, corpus_version: &str) -> Result<Value, ConfigError> {
    let seed = cfg.seed()?;
    let models: Vec<Value> = cfg
        .models
        .iter()
        .map(|m| {
            json!({
                "model_id": m.model_id,
                "endpoint": m.endpoint,
                "remote_name": m.remote_name,
                "temperature": m.temperature,
                "max_tokens": m.max_tokens,
                "extract": m.extract,
            })
        })
        .collect();
    Ok(json!({
        "corpus_version": corpus_version,
        "template_version": TEMPLATE_VERSION,
        "stopwords_version": STOPWORDS_VERSION,
        "seed": seed,
        "repetitions": cfg.repetitions,
        "scale": cfg.scale,
        "estimator": cfg.estimator,
        "forms": cfg.forms,
        "risk_forms": cfg.risk_forms,
        "languages": cfg.languages,
        "probes": cfg.probes,
        "models": models,
        "embedder": cfg.embedder.as_ref().map(|e| json!({"model_id": e.model_id, "endpoint": e.endpoint, "dim": e.dim})),
        "clustering": cfg.clustering,
        "variance_probes": cfg.variance_probes,
        "positive_probes": cfg.positive_probes,
    }))
}

pub fn manifest_digest(cfg: &RunConfig, corpus_version: &str) -> Result<String, ConfigError> {
    Ok(digest(&reproducibility_fields(cfg, corpus_version)?))
}

impl RunManifest {
    pub fn build(cfg: &RunConfig, corpus_version: &str, started_at: u64) -> Result<Self, ConfigError> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            corpus_version: corpus_version.into(),
            template_version: TEMPLATE_VERSION.into(),
            stopwords_version: STOPWORDS_VERSION.into(),
            digest: manifest_digest(cfg, corpus_version)?,
            config: cfg.clone(),
            started_at,
            finished_at: None,
            completion: None,
        })
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(RUN_MANIFEST_FILE), text + "\n")
    }

    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join(RUN_MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
