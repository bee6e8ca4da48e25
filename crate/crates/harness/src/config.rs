//! Run configuration, read from TOML. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use finbias_core::corpus::Tier;
use finbias_core::lottery::Language;
use finbias_core::parse::ExtractConfig;
use finbias_core::stats::Estimator;
use finbias_core::{InputForm, ScoreScale};
use serde::{Deserialize, Serialize};

pub const MOCK_ENDPOINT: &str = "mock";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("model `{model}` needs credentials in ${var}")]
    MissingCredential { model: String, var: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    /// Base delay, doubled after every failed attempt.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 2, backoff_ms: 500 }
    }
}

/// Where the interesting fields live in a provider's JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderMapping {
    pub chat_path: String,
    /// JSON pointer to the completion text.
    pub content_pointer: String,
    pub embed_path: String,
    /// JSON pointer to the list of embedding items.
    pub embedding_list_pointer: String,
    /// JSON pointer, relative to an item, to its vector.
    pub embedding_item_pointer: String,
}

impl Default for ProviderMapping {
    fn default() -> Self {
        ProviderMapping {
            chat_path: "/chat/completions".into(),
            content_pointer: "/choices/0/message/content".into(),
            embed_path: "/embeddings".into(),
            embedding_list_pointer: "/data".into(),
            embedding_item_pointer: "/embedding".into(),
        }
    }
}

fn one() -> usize {
    1
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_timeout() -> u64 {
    60_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: String,
    /// Base URL of an OpenAI-compatible API, or `mock`.
    pub endpoint: String,
    /// Name sent in requests; defaults to `model_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_name: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "one")]
    pub max_parallel: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Mock behaviour script; required for the mock endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub mapping: ProviderMapping,
    #[serde(default)]
    pub extract: ExtractConfig,
}

impl ModelConfig {
    pub fn mock(model_id: &str, script: impl Into<PathBuf>) -> Self {
        ModelConfig {
            model_id: model_id.into(),
            endpoint: MOCK_ENDPOINT.into(),
            remote_name: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout(),
            max_parallel: 4,
            retry: RetryPolicy { retries: 0, backoff_ms: 0 },
            api_key_env: None,
            script: Some(script.into()),
            mapping: ProviderMapping::default(),
            extract: ExtractConfig::default(),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(format!("model `{}`: {m}", self.model_id)));
        if self.model_id.trim().is_empty() {
            return Err(ConfigError::Invalid("model_id must not be empty".into()));
        }
        if self.max_parallel == 0 {
            return bad("max_parallel must be at least 1");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a non-negative number");
        }
        if self.is_mock() && self.script.is_none() {
            return bad("the mock endpoint requires a script");
        }
        Ok(())
    }
}

fn default_dim() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub model_id: String,
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_name: Option<String>,
    /// Expected vector length; mock vectors have exactly this many entries.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub mapping: ProviderMapping,
}

impl EmbedderConfig {
    pub fn mock(dim: usize) -> Self {
        EmbedderConfig {
            model_id: "mock-embedder".into(),
            endpoint: MOCK_ENDPOINT.into(),
            remote_name: None,
            dim,
            timeout_ms: default_timeout(),
            retry: RetryPolicy { retries: 0, backoff_ms: 0 },
            api_key_env: None,
            mapping: ProviderMapping::default(),
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }
}

fn yes() -> bool {
    true
}

fn default_per_tier() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSelection {
    #[serde(default = "yes")]
    pub news: bool,
    #[serde(default = "yes")]
    pub interactions: bool,
    #[serde(default = "yes")]
    pub risk: bool,
    #[serde(default = "all_tiers")]
    pub tiers: Vec<Tier>,
    /// Companies drawn from each market-cap tier.
    #[serde(default = "default_per_tier")]
    pub per_tier: usize,
    /// Restrict news probes to these ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub news_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_ids: Option<Vec<String>>,
}

fn all_tiers() -> Vec<Tier> {
    Tier::ALL.to_vec()
}

impl Default for ProbeSelection {
    fn default() -> Self {
        ProbeSelection {
            news: true,
            interactions: true,
            risk: true,
            tiers: all_tiers(),
            per_tier: default_per_tier(),
            news_ids: None,
            scenario_ids: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub k: usize,
    pub top_n: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { k: 10, top_n: 10 }
    }
}

fn default_forms() -> Vec<InputForm> {
    vec![InputForm::Direct, InputForm::Cot]
}

fn default_risk_forms() -> Vec<InputForm> {
    vec![InputForm::Direct, InputForm::Instruct]
}

fn default_languages() -> Vec<Language> {
    vec![Language::Zh, Language::En]
}

fn default_repetitions() -> u32 {
    5
}

fn default_threshold() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// Base seed; option order for repetition `r` uses `seed + r`, and
    /// clustering uses `seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default)]
    pub scale: ScoreScale,
    #[serde(default)]
    pub estimator: Estimator,
    /// Forms for news and interaction probes.
    #[serde(default = "default_forms")]
    pub forms: Vec<InputForm>,
    /// Forms for risk scenarios.
    #[serde(default = "default_risk_forms")]
    pub risk_forms: Vec<InputForm>,
    #[serde(default = "default_languages")]
    pub languages: Vec<Language>,
    #[serde(default)]
    pub probes: ProbeSelection,
    pub models: Vec<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<EmbedderConfig>,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    /// Probes averaged by the variance indices (default: all).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_probes: Option<Vec<String>>,
    /// Probes counted by positive-times (default: mixed-emotion news).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_probes: Option<Vec<String>>,
    /// Failed-cell fraction above which `run` exits with status 2.
    #[serde(default = "default_threshold")]
    pub partial_failure_threshold: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        fix(&mut self.cache_dir);
        for m in &mut self.models {
            if let Some(s) = &mut m.script {
                fix(s);
            }
        }
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::Invalid("seed is required".into()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        self.seed()?;
        if self.models.is_empty() {
            return invalid("at least one model is required");
        }
        let mut ids: Vec<&str> = self.models.iter().map(|m| m.model_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return invalid("model ids must be unique");
        }
        for m in &self.models {
            m.validate()?;
        }
        if !(self.probes.news || self.probes.interactions || self.probes.risk) {
            return invalid("select at least one probe family");
        }
        if !self.scale.is_valid() {
            return invalid("score scale must have min < max");
        }
        if self.forms.contains(&InputForm::Translation) {
            return invalid("translation applies to risk scenarios only");
        }
        if self.probes.per_tier == 0 || self.probes.tiers.is_empty() {
            return invalid("per_tier and tiers must be non-empty");
        }
        if self.repetitions == 0 {
            return invalid("repetitions must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.partial_failure_threshold) {
            return invalid("partial_failure_threshold must lie in [0, 1]");
        }
        if self.clustering.k == 0 || self.clustering.top_n == 0 {
            return invalid("clustering k and top_n must be positive");
        }
        if let Some(e) = &self.embedder {
            if e.dim == 0 {
                return invalid("embedder dim must be positive");
            }
        }
        Ok(())
    }

    /// Live endpoints must find their credentials in the environment.
    pub fn check_credentials(&self) -> Result<(), ConfigError> {
        let vars = self
            .models
            .iter()
            .filter(|m| !m.is_mock())
            .map(|m| (m.model_id.as_str(), m.api_key_env.as_deref()))
            .chain(self.embedder.iter().filter(|e| !e.is_mock()).map(|e| (e.model_id.as_str(), e.api_key_env.as_deref())));
        for (model, var) in vars {
            let Some(var) = var else { continue };
            if std::env::var(var).map(|v| v.is_empty()).unwrap_or(true) {
                return Err(ConfigError::MissingCredential { model: model.into(), var: var.into() });
            }
        }
        Ok(())
    }
}
