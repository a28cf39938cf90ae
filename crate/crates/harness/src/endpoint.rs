//! Remote model endpoints and local stand-ins.
//!
//! An HTTP endpoint is described entirely by configuration: a URL, a JSON
//! request template, and JSON pointers saying where the model id, the input
//! text and the optional system prompt go and where the answer is found in
//! the response. Defaults follow the common chat-completions and embeddings
//! request shapes.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing::debug;

use crate::error::{Error, RemoteError, RemoteErrorKind, Result};
use crate::scoring::EmbeddingVector;

#[async_trait]
pub trait ChatModel: Send + Sync {
    fn model_id(&self) -> &str;
    async fn complete(&self, system: Option<&str>, user: &str) -> Result<String, RemoteError>;
}

#[async_trait]
pub trait Translator: Send + Sync {
    fn model_id(&self) -> &str;
    /// `original` is only consulted by test doubles.
    async fn translate(&self, prompt: &str, original: &str) -> Result<String, RemoteError>;
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dimension(&self) -> Option<usize>;
    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RemoteError>;
}

fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}
fn default_timeout() -> f64 {
    60.0
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEndpointConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    /// JSON body template; the fields named by the paths below are
    /// overwritten on each call.
    #[serde(default)]
    pub request: Option<Value>,
    #[serde(default)]
    pub model_path: Option<String>,
    #[serde(default)]
    pub input_path: Option<String>,
    #[serde(default)]
    pub system_path: Option<String>,
    #[serde(default)]
    pub response_path: Option<String>,
    /// Expected embedding length.
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl HttpEndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpEndpointConfig {
            url: url.into(),
            model: model.into(),
            api_key_env: None,
            auth_header: default_auth_header(),
            auth_prefix: default_auth_prefix(),
            request: None,
            model_path: None,
            input_path: None,
            system_path: None,
            response_path: None,
            dimension: None,
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff(),
        }
    }

    /// Reads the API key. A named but unset variable is a config error.
    pub fn credential(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(Error::Config(format!(
                    "environment variable {var} (api key for {}) is not set",
                    self.url
                ))),
            },
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Chat,
    Embedding,
}

/// Request plumbing shared by chat and embedding endpoints.
struct HttpEndpoint {
    config: HttpEndpointConfig,
    template: Value,
    model_path: String,
    input_path: String,
    system_path: Option<String>,
    response_path: String,
    key: Option<String>,
    client: reqwest::Client,
}

impl HttpEndpoint {
    fn new(config: HttpEndpointConfig, shape: Shape) -> Result<Self> {
        let (template, model_path, input_path, response_path) = match shape {
            Shape::Chat => (
                json!({"model": "", "messages": [{"role": "user", "content": ""}]}),
                "/model",
                "/messages/0/content",
                "/choices/0/message/content",
            ),
            Shape::Embedding => (
                json!({"model": "", "input": ""}),
                "/model",
                "/input",
                "/data/0/embedding",
            ),
        };
        let template = config.request.clone().unwrap_or(template);
        let model_path = config.model_path.clone().unwrap_or_else(|| model_path.into());
        let input_path = config.input_path.clone().unwrap_or_else(|| input_path.into());
        let response_path = config.response_path.clone().unwrap_or_else(|| response_path.into());
        for path in [Some(&model_path), Some(&input_path), config.system_path.as_ref()]
            .into_iter()
            .flatten()
        {
            if template.pointer(path).is_none() {
                return Err(Error::Config(format!(
                    "request template for {} has no field at {path:?}",
                    config.url
                )));
            }
        }
        if !(response_path.is_empty() || response_path.starts_with('/')) {
            return Err(Error::Config(format!(
                "response path {response_path:?} is not a JSON pointer"
            )));
        }
        if config.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        if !(config.timeout_secs.is_finite() && config.timeout_secs > 0.0) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        let key = config.credential()?;
        Ok(HttpEndpoint {
            system_path: config.system_path.clone(),
            template,
            model_path,
            input_path,
            response_path,
            key,
            client: reqwest::Client::new(),
            config,
        })
    }

    fn err(&self, kind: RemoteErrorKind, message: impl Into<String>) -> RemoteError {
        RemoteError::new(kind, &self.config.url, message)
    }

    fn redact(&self, s: &str) -> String {
        match &self.key {
            Some(k) => s.replace(k.as_str(), "***"),
            None => s.to_string(),
        }
    }

    fn body(&self, system: Option<&str>, input: &str) -> Value {
        let mut body = self.template.clone();
        let set = |body: &mut Value, path: &str, v: &str| {
            if let Some(slot) = body.pointer_mut(path) {
                *slot = Value::String(v.to_string());
            }
        };
        set(&mut body, &self.model_path, &self.config.model);
        match (&self.system_path, system) {
            (Some(path), s) => {
                set(&mut body, path, s.unwrap_or(""));
                set(&mut body, &self.input_path, input);
            }
            (None, Some(s)) => set(&mut body, &self.input_path, &format!("{s}\n\n{input}")),
            (None, None) => set(&mut body, &self.input_path, input),
        }
        body
    }

    /// POSTs with retries and returns the value at the response path.
    async fn call(&self, body: Value) -> Result<Value, RemoteError> {
        let payload = serde_json::to_vec(&body).expect("JSON values serialize");
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = self.err(RemoteErrorKind::Transient, "no attempt made");
        for attempt in 1..=self.config.max_attempts {
            debug!(
                url = %self.config.url,
                attempt,
                auth = %if self.key.is_some() { format!("{}: {}***", self.config.auth_header, self.config.auth_prefix) } else { "none".into() },
                request = %self.redact(&String::from_utf8_lossy(&payload)),
                "endpoint request"
            );
            let mut req = self
                .client
                .post(&self.config.url)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .timeout(timeout)
                .body(payload.clone());
            if let Some(key) = &self.key {
                req = req.header(
                    self.config.auth_header.as_str(),
                    format!("{}{key}", self.config.auth_prefix),
                );
            }
            let retry = match req.send().await {
                Err(e) if e.is_timeout() => {
                    last = self.err(RemoteErrorKind::Timeout, format!("no response within {timeout:?}"));
                    true
                }
                Err(e) => {
                    last = self.err(RemoteErrorKind::Transient, self.redact(&e.to_string()));
                    true
                }
                Ok(resp) => {
                    let status = resp.status();
                    let text = match resp.text().await {
                        Ok(t) => t,
                        Err(e) if e.is_timeout() => {
                            last = self.err(RemoteErrorKind::Timeout, "timed out reading response body");
                            continue_after(&mut delay, attempt, self.config.max_attempts).await;
                            continue;
                        }
                        Err(e) => {
                            last = self.err(RemoteErrorKind::Transient, self.redact(&e.to_string()));
                            continue_after(&mut delay, attempt, self.config.max_attempts).await;
                            continue;
                        }
                    };
                    let text = self.redact(&text);
                    debug!(url = %self.config.url, status = status.as_u16(), response = %text, "endpoint response");
                    let brief: String = text.chars().take(300).collect();
                    match status.as_u16() {
                        200..=299 => return self.extract(&text, attempt),
                        401 | 403 => {
                            return Err(RemoteError {
                                attempts: attempt,
                                ..self.err(RemoteErrorKind::Auth, format!("HTTP {status}: {brief}"))
                            })
                        }
                        429 | 500..=599 => {
                            last = self.err(RemoteErrorKind::Transient, format!("HTTP {status}: {brief}"));
                            true
                        }
                        _ => {
                            return Err(RemoteError {
                                attempts: attempt,
                                ..self.err(RemoteErrorKind::Input, format!("HTTP {status}: {brief}"))
                            })
                        }
                    }
                }
            };
            if retry {
                continue_after(&mut delay, attempt, self.config.max_attempts).await;
            }
        }
        last.attempts = self.config.max_attempts;
        Err(last)
    }

    fn extract(&self, text: &str, attempts: u32) -> Result<Value, RemoteError> {
        let malformed = |m: String| RemoteError {
            attempts,
            ..self.err(RemoteErrorKind::Malformed, m)
        };
        let value: Value = serde_json::from_str(text).map_err(|e| malformed(format!("response is not JSON: {e}")))?;
        value
            .pointer(&self.response_path)
            .cloned()
            .ok_or_else(|| malformed(format!("response has no field at {:?}", self.response_path)))
    }
}

async fn continue_after(delay: &mut Duration, attempt: u32, max: u32) {
    if attempt < max {
        tokio::time::sleep(*delay).await;
        *delay *= 2;
    }
}

/// Chat-completion endpoint over HTTP.
pub struct HttpChat {
    inner: HttpEndpoint,
}

impl HttpChat {
    pub fn new(config: HttpEndpointConfig) -> Result<Self> {
        Ok(HttpChat {
            inner: HttpEndpoint::new(config, Shape::Chat)?,
        })
    }
}

#[async_trait]
impl ChatModel for HttpChat {
    fn model_id(&self) -> &str {
        &self.inner.config.model
    }

    async fn complete(&self, system: Option<&str>, user: &str) -> Result<String, RemoteError> {
        if user.trim().is_empty() {
            return Err(self.inner.err(RemoteErrorKind::Input, "empty prompt"));
        }
        let value = self.inner.call(self.inner.body(system, user)).await?;
        value.as_str().map(str::to_string).ok_or_else(|| {
            self.inner
                .err(RemoteErrorKind::Malformed, format!("expected a string, got {value}"))
        })
    }
}

#[async_trait]
impl Translator for HttpChat {
    fn model_id(&self) -> &str {
        &self.inner.config.model
    }

    async fn translate(&self, prompt: &str, _original: &str) -> Result<String, RemoteError> {
        self.complete(None, prompt).await
    }
}

/// Embedding endpoint over HTTP.
pub struct HttpEmbedder {
    inner: HttpEndpoint,
}

impl HttpEmbedder {
    pub fn new(config: HttpEndpointConfig) -> Result<Self> {
        Ok(HttpEmbedder {
            inner: HttpEndpoint::new(config, Shape::Embedding)?,
        })
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.inner.config.model
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.config.dimension
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RemoteError> {
        if text.trim().is_empty() {
            return Err(self.inner.err(RemoteErrorKind::Input, "empty text"));
        }
        let value = self.inner.call(self.inner.body(None, text)).await?;
        let malformed = |m: &str| self.inner.err(RemoteErrorKind::Malformed, m);
        let values = value
            .as_array()
            .ok_or_else(|| malformed("embedding is not an array"))?
            .iter()
            .map(|v| v.as_f64().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| malformed("embedding has non-numeric or non-finite entries"))?;
        if let Some(dim) = self.inner.config.dimension {
            if values.len() != dim {
                return Err(self.inner.err(
                    RemoteErrorKind::Config,
                    format!("embedding has {} entries, config says {dim}", values.len()),
                ));
            }
        }
        Ok(EmbeddingVector::new(values, &self.inner.config.model))
    }
}

/// Returns the untransformed passage, so every score should be 1.
pub struct EchoOriginal;

#[async_trait]
impl Translator for EchoOriginal {
    fn model_id(&self) -> &str {
        "echo-original"
    }

    async fn translate(&self, _prompt: &str, original: &str) -> Result<String, RemoteError> {
        Ok(original.to_string())
    }
}

/// Returns the prompt unchanged.
pub struct EchoPrompt;

#[async_trait]
impl Translator for EchoPrompt {
    fn model_id(&self) -> &str {
        "echo-prompt"
    }

    async fn translate(&self, prompt: &str, _original: &str) -> Result<String, RemoteError> {
        Ok(prompt.to_string())
    }
}

/// Deterministic bag-of-words embedding by feature hashing.
pub struct HashEmbedder {
    dimension: usize,
    model_id: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("hash embedding dimension must be positive".into()));
        }
        Ok(HashEmbedder {
            dimension,
            model_id: format!("hash-{dimension}"),
        })
    }

    pub fn embed_sync(&self, text: &str) -> Result<EmbeddingVector, RemoteError> {
        if text.trim().is_empty() {
            return Err(RemoteError::new(RemoteErrorKind::Input, &self.model_id, "empty text"));
        }
        let mut values = vec![0.0; self.dimension];
        for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let digest = Sha256::digest(word.to_lowercase().as_bytes());
            let mut head = [0u8; 8];
            head.copy_from_slice(&digest[..8]);
            let h = u64::from_le_bytes(head);
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            values[(h % self.dimension as u64) as usize] += sign;
        }
        Ok(EmbeddingVector::new(values, &self.model_id))
    }
}

#[async_trait]
impl Embedder for HashEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dimension)
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RemoteError> {
        self.embed_sync(text)
    }
}

/// Replays canned replies in order and records what it was asked.
pub struct ScriptedChat {
    replies: Mutex<VecDeque<String>>,
    calls: Mutex<Vec<(Option<String>, String)>>,
}

impl ScriptedChat {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedChat {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Splits a script file on lines consisting of `---`.
    pub fn from_script(text: &str) -> Self {
        let mut replies = vec![String::new()];
        for line in text.lines() {
            if line.trim_end() == "---" {
                replies.push(String::new());
            } else {
                let cur = replies.last_mut().expect("nonempty");
                if !cur.is_empty() {
                    cur.push('\n');
                }
                cur.push_str(line);
            }
        }
        replies.retain(|r| !r.trim().is_empty());
        ScriptedChat::new(replies)
    }

    pub fn calls(&self) -> Vec<(Option<String>, String)> {
        self.calls.lock().expect("lock").clone()
    }
}

#[async_trait]
impl ChatModel for ScriptedChat {
    fn model_id(&self) -> &str {
        "scripted"
    }

    async fn complete(&self, system: Option<&str>, user: &str) -> Result<String, RemoteError> {
        self.calls
            .lock()
            .expect("lock")
            .push((system.map(str::to_string), user.to_string()));
        self.replies
            .lock()
            .expect("lock")
            .pop_front()
            .ok_or_else(|| RemoteError::new(RemoteErrorKind::Input, "scripted", "script exhausted"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TranslatorConfig {
    Http(Box<HttpEndpointConfig>),
    EchoOriginal,
    EchoPrompt,
}

fn default_hash_dimension() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderConfig {
    Http(Box<HttpEndpointConfig>),
    Hash {
        #[serde(default = "default_hash_dimension")]
        dimension: usize,
    },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hash {
            dimension: default_hash_dimension(),
        }
    }
}

pub fn build_translator(config: &TranslatorConfig) -> Result<std::sync::Arc<dyn Translator>> {
    Ok(match config {
        TranslatorConfig::Http(c) => std::sync::Arc::new(HttpChat::new((**c).clone())?),
        TranslatorConfig::EchoOriginal => std::sync::Arc::new(EchoOriginal),
        TranslatorConfig::EchoPrompt => std::sync::Arc::new(EchoPrompt),
    })
}

pub fn build_embedder(config: &EmbedderConfig) -> Result<std::sync::Arc<dyn Embedder>> {
    Ok(match config {
        EmbedderConfig::Http(c) => std::sync::Arc::new(HttpEmbedder::new((**c).clone())?),
        EmbedderConfig::Hash { dimension } => std::sync::Arc::new(HashEmbedder::new(*dimension)?),
    })
}
