//! Blocking client for OpenAI-compatible chat and embedding endpoints.

use std::time::Duration;

use serde_json::{json, Value};

use crate::config::ProviderMapping;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HttpError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed reply: {0}")]
    Malformed(String),
}

impl HttpError {
    /// Worth another attempt under the retry policy.
    pub fn is_retryable(&self) -> bool {
        match self {
            HttpError::Transport(_) | HttpError::Timeout => true,
            HttpError::Status { code, .. } => *code == 429 || *code >= 500,
            HttpError::Malformed(_) => false,
        }
    }
}

pub struct HttpClient {
    agent: ureq::Agent,
}

fn classify(e: ureq::Error) -> HttpError {
    match e {
        ureq::Error::Timeout(_) => HttpError::Timeout,
        ureq::Error::Json(e) => HttpError::Malformed(e.to_string()),
        other => HttpError::Transport(other.to_string()),
    }
}

fn url(endpoint: &str, path: &str) -> String {
    format!("{}{}", endpoint.trim_end_matches('/'), path)
}

impl HttpClient {
    pub fn new(timeout_ms: u64) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient { agent }
    }

    fn post(&self, url: &str, api_key: Option<&str>, body: &Value) -> Result<Value, HttpError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(classify)?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        if !(200..300).contains(&code) {
            return Err(HttpError::Status { code, body: text.chars().take(500).collect() });
        }
        serde_json::from_str(&text).map_err(|e| HttpError::Malformed(e.to_string()))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn chat(
        &self,
        endpoint: &str,
        mapping: &ProviderMapping,
        model: &str,
        api_key: Option<&str>,
        prompt: &str,
        temperature: f64,
        max_tokens: u32,
    ) -> Result<String, HttpError> {
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        });
        let reply = self.post(&url(endpoint, &mapping.chat_path), api_key, &body)?;
        reply
            .pointer(&mapping.content_pointer)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| HttpError::Malformed(format!("no string at {}", mapping.content_pointer)))
    }

    pub fn embed(
        &self,
        endpoint: &str,
        mapping: &ProviderMapping,
        model: &str,
        api_key: Option<&str>,
        texts: &[String],
    ) -> Result<Vec<Vec<f64>>, HttpError> {
        let body = json!({ "model": model, "input": texts });
        let reply = self.post(&url(endpoint, &mapping.embed_path), api_key, &body)?;
        let items = reply
            .pointer(&mapping.embedding_list_pointer)
            .and_then(Value::as_array)
            .ok_or_else(|| HttpError::Malformed(format!("no array at {}", mapping.embedding_list_pointer)))?;
        if items.len() != texts.len() {
            return Err(HttpError::Malformed(format!("{} vectors for {} inputs", items.len(), texts.len())));
        }
        items
            .iter()
            .map(|item| {
                item.pointer(&mapping.embedding_item_pointer)
                    .and_then(Value::as_array)
                    .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| HttpError::Malformed("embedding item is not a numeric array".into()))
            })
            .collect()
    }
}
