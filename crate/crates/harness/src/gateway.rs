//! Model gateway: cache lookup, backend dispatch with retries, and a
//! bounded worker pool for batches.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use finbias_core::prompting::Prompt;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cache::{digest, now_secs, Cache, CacheError, CompletionRecord, EmbeddingRecord};
use crate::config::{EmbedderConfig, ModelConfig, RetryPolicy};
use crate::http::{HttpClient, HttpError};
use crate::mock::{mock_embed, MockError, MockModel, MockScript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Live,
    Cache,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub request_key: String,
    pub text: String,
    pub latency_ms: u64,
    pub source: Source,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
    #[error("endpoint rejected the request with HTTP {code}: {body}")]
    Rejected { code: u16, body: String },
    #[error("model `{0}` is not registered")]
    UnknownModel(String),
    #[error("{0}")]
    Script(String),
    #[error("nothing to embed")]
    EmptyInput,
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl GatewayError {
    /// Short label written to cell records and the run log.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Transport { .. } => "transport",
            GatewayError::Timeout { .. } => "timeout",
            GatewayError::Malformed(_) => "malformed",
            GatewayError::Rejected { .. } => "rejected",
            GatewayError::UnknownModel(_) | GatewayError::Script(_) => "config",
            GatewayError::EmptyInput | GatewayError::Dimension { .. } => "embedding",
            GatewayError::Cache(_) => "cache",
        }
    }

    /// Failures a later resume should retry.
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transport { .. } | GatewayError::Timeout { .. })
    }
}

enum Backend {
    Mock(Box<MockModel>),
    Http(HttpClient),
}

/// One completion request; `salt` distinguishes repetitions when sampling
/// is stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub prompt: Prompt,
    pub salt: u64,
}

pub struct Gateway {
    cache: Cache,
    models: HashMap<String, Backend>,
    embedders: HashMap<String, Backend>,
    backend_calls: AtomicUsize,
}

/// `request_key` covers the model, the prompt text and the sampling
/// parameters; the salt only matters when temperature is positive.
pub fn request_key(prompt_text: &str, cfg: &ModelConfig, salt: u64) -> String {
    let salt = (cfg.temperature > 0.0).then_some(salt);
    digest(&(&cfg.model_id, prompt_text, cfg.temperature, cfg.max_tokens, salt))
}

fn embedding_key(text: &str, cfg: &EmbedderConfig) -> String {
    digest(&("embedding", &cfg.model_id, cfg.dim, text))
}

fn with_retries<T>(policy: RetryPolicy, mut call: impl FnMut() -> Result<T, HttpError>) -> Result<T, GatewayError> {
    let attempts = policy.retries + 1;
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 && policy.backoff_ms > 0 {
            let factor = 1u64 << (attempt - 1).min(16);
            std::thread::sleep(Duration::from_millis(policy.backoff_ms.saturating_mul(factor)));
        }
        match call() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() => last = Some(e),
            Err(HttpError::Status { code, body }) => return Err(GatewayError::Rejected { code, body }),
            Err(e) => return Err(GatewayError::Malformed(e.to_string())),
        }
    }
    Err(match last {
        Some(HttpError::Timeout) => GatewayError::Timeout { attempts },
        Some(e) => GatewayError::Transport { attempts, message: e.to_string() },
        None => unreachable!("at least one attempt"),
    })
}

fn mock_call<T>(policy: RetryPolicy, mut call: impl FnMut() -> Result<T, MockError>) -> Result<T, GatewayError> {
    with_retries(policy, || call().map_err(|e| HttpError::Transport(e.to_string())))
}

fn api_key(var: &Option<String>) -> Option<String> {
    var.as_ref().and_then(|v| std::env::var(v).ok())
}

impl Gateway {
    pub fn new(cache: Cache) -> Self {
        Gateway { cache, models: HashMap::new(), embedders: HashMap::new(), backend_calls: AtomicUsize::new(0) }
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Calls that reached a backend (mock or live) rather than the cache.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn register_model(&mut self, cfg: &ModelConfig) -> Result<(), GatewayError> {
        let backend = if cfg.is_mock() {
            let path = cfg.script.as_ref().ok_or_else(|| GatewayError::Script("mock model without script".into()))?;
            let script = MockScript::load(path).map_err(|e| GatewayError::Script(e.to_string()))?;
            Backend::Mock(Box::new(MockModel::new(&cfg.model_id, script)))
        } else {
            Backend::Http(HttpClient::new(cfg.timeout_ms))
        };
        self.models.insert(cfg.model_id.clone(), backend);
        Ok(())
    }

    /// Register a mock model from an in-memory script.
    pub fn register_mock(&mut self, model_id: &str, script: MockScript) {
        self.models.insert(model_id.into(), Backend::Mock(Box::new(MockModel::new(model_id, script))));
    }

    pub fn register_embedder(&mut self, cfg: &EmbedderConfig) {
        let backend = if cfg.is_mock() {
            Backend::Mock(Box::new(MockModel::new(&cfg.model_id, MockScript::default())))
        } else {
            Backend::Http(HttpClient::new(cfg.timeout_ms))
        };
        self.embedders.insert(cfg.model_id.clone(), backend);
    }

    pub fn complete(&self, prompt: &Prompt, cfg: &ModelConfig) -> Result<ModelResponse, GatewayError> {
        self.complete_salted(prompt, cfg, 0)
    }

    pub fn complete_salted(&self, prompt: &Prompt, cfg: &ModelConfig, salt: u64) -> Result<ModelResponse, GatewayError> {
        let key = request_key(&prompt.text, cfg, salt);
        if let Some(hit) = self.cache.completion(&key) {
            return Ok(ModelResponse { request_key: key, text: hit.text, latency_ms: 0, source: Source::Cache });
        }
        let backend = self.models.get(&cfg.model_id).ok_or_else(|| GatewayError::UnknownModel(cfg.model_id.clone()))?;
        let started = Instant::now();
        let (text, source) = match backend {
            Backend::Mock(m) => {
                let text = mock_call(cfg.retry, || {
                    self.backend_calls.fetch_add(1, Ordering::SeqCst);
                    m.complete(prompt, salt)
                })?;
                (text, Source::Mock)
            }
            Backend::Http(client) => {
                let key = api_key(&cfg.api_key_env);
                let name = cfg.remote_name.as_deref().unwrap_or(&cfg.model_id);
                let text = with_retries(cfg.retry, || {
                    self.backend_calls.fetch_add(1, Ordering::SeqCst);
                    client.chat(&cfg.endpoint, &cfg.mapping, name, key.as_deref(), &prompt.text, cfg.temperature, cfg.max_tokens)
                })?;
                (text, Source::Live)
            }
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        self.cache.put_completion(CompletionRecord {
            key: key.clone(),
            model_id: cfg.model_id.clone(),
            params: json!({
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_tokens,
                "endpoint": cfg.endpoint,
                "template_version": prompt.meta.template_version,
            }),
            text: text.clone(),
            timestamp: now_secs(),
        })?;
        Ok(ModelResponse { request_key: key, text, latency_ms, source })
    }

    /// Complete every request with at most `cfg.max_parallel` in flight.
    /// Results come back in input order; per-item failures stay per item
    /// and only a cache write failure aborts the batch.
    pub fn run_batch(
        &self,
        requests: &[Request],
        cfg: &ModelConfig,
    ) -> Result<Vec<Result<ModelResponse, GatewayError>>, CacheError> {
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let slots: Mutex<Vec<Option<Result<ModelResponse, GatewayError>>>> =
            Mutex::new((0..requests.len()).map(|_| None).collect());
        let fatal: Mutex<Option<CacheError>> = Mutex::new(None);
        let workers = cfg.max_parallel.max(1).min(requests.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = requests.get(i) else { break };
                    match self.complete_salted(&req.prompt, cfg, req.salt) {
                        Err(GatewayError::Cache(e)) => {
                            abort.store(true, Ordering::SeqCst);
                            fatal.lock().expect("batch lock").get_or_insert(e);
                        }
                        r => slots.lock().expect("batch lock")[i] = Some(r),
                    }
                });
            }
        });
        if let Some(e) = fatal.into_inner().expect("batch lock") {
            return Err(e);
        }
        Ok(slots
            .into_inner()
            .expect("batch lock")
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect())
    }

    /// One vector per text, in input order, each of length `cfg.dim`.
    pub fn embed(&self, texts: &[String], cfg: &EmbedderConfig) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let keys: Vec<String> = texts.iter().map(|t| embedding_key(t, cfg)).collect();
        let mut out: Vec<Option<Vec<f64>>> = keys.iter().map(|k| self.cache.embedding(k)).collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let backend =
                self.embedders.get(&cfg.model_id).ok_or_else(|| GatewayError::UnknownModel(cfg.model_id.clone()))?;
            for chunk in missing.chunks(64) {
                let batch: Vec<String> = chunk.iter().map(|&i| texts[i].clone()).collect();
                let vectors = match backend {
                    Backend::Mock(_) => {
                        self.backend_calls.fetch_add(1, Ordering::SeqCst);
                        batch.iter().map(|t| mock_embed(t, cfg.dim)).collect()
                    }
                    Backend::Http(client) => {
                        let key = api_key(&cfg.api_key_env);
                        let name = cfg.remote_name.as_deref().unwrap_or(&cfg.model_id);
                        with_retries(cfg.retry, || {
                            self.backend_calls.fetch_add(1, Ordering::SeqCst);
                            client.embed(&cfg.endpoint, &cfg.mapping, name, key.as_deref(), &batch)
                        })?
                    }
                };
                for (&i, v) in chunk.iter().zip(vectors) {
                    if v.len() != cfg.dim {
                        return Err(GatewayError::Dimension { expected: cfg.dim, got: v.len() });
                    }
                    self.cache.put_embedding(EmbeddingRecord {
                        key: keys[i].clone(),
                        model_id: cfg.model_id.clone(),
                        vector: v.clone(),
                        timestamp: now_secs(),
                    })?;
                    out[i] = Some(v);
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled from cache or backend")).collect())
    }
}
