use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::prompt::PromptBundle;
use crate::{Error, Result};

pub const DEFAULT_KEY_ENV: &str = "TWIN_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completion request body. Provider-specific sampling settings ride
/// in `extra` and are sent as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ChatRequest {
    pub fn from_bundle(bundle: &PromptBundle, cfg: &EndpointConfig) -> Self {
        Self {
            model: cfg.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: bundle.system.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: bundle.user.clone(),
                },
            ],
            temperature: cfg.temperature,
            extra: cfg.extra.clone(),
        }
    }

    /// Hex SHA-256 of the serialized body; the cassette key.
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(body))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the credential.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, Value>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.into()
}
fn default_timeout() -> u64 {
    120
}
fn default_parallelism() -> usize {
    4
}

impl EndpointConfig {
    pub fn new(url: &str, model: &str) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            temperature: None,
            extra: BTreeMap::new(),
            timeout_secs: default_timeout(),
            parallelism: default_parallelism(),
        }
    }

    /// TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

/// What came back: for 2xx the message text, otherwise the error body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub status: u16,
    pub text: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFailure {
    pub retryable: bool,
    pub message: String,
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &ChatRequest) -> std::result::Result<Reply, TransportFailure>;
}

/// JSON-over-HTTP chat completion. The credential is read once from the
/// configured environment variable and never printed.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("url", &self.url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpTransport {
    pub fn new(cfg: &EndpointConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("environment variable {} is not set; sending without credentials", cfg.api_key_env);
        }
        Ok(Self {
            client,
            url: cfg.url.clone(),
            api_key,
        })
    }
}

fn extract_content(body: &str) -> std::result::Result<(String, Option<Usage>), String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {e}"))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or("reply has no choices[0].message.content")?
        .to_string();
    let usage = v.get("usage").map(|u| Usage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64),
        completion_tokens: u.get("completion_tokens").and_then(Value::as_u64),
    });
    Ok((text, usage))
}

impl Transport for HttpTransport {
    fn send(&self, req: &ChatRequest) -> std::result::Result<Reply, TransportFailure> {
        let mut rb = self.client.post(&self.url).json(req);
        if let Some(k) = &self.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb.send().map_err(|e| TransportFailure {
            retryable: true,
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportFailure {
            retryable: true,
            message: e.to_string(),
        })?;
        if !(200..300).contains(&status) {
            return Ok(Reply {
                status,
                text: body,
                usage: None,
            });
        }
        let (text, usage) = extract_content(&body).map_err(|message| TransportFailure {
            retryable: false,
            message,
        })?;
        Ok(Reply { status, text, usage })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub hash: String,
    pub response: String,
    pub status: u16,
}

/// Recorded replies keyed by request hash (JSONL on disk).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cassette {
    entries: BTreeMap<String, CassetteEntry>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn load_str(text: &str) -> Result<Self> {
        Self::parse(text, "<cassette>")
    }

    fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: CassetteEntry =
                serde_json::from_str(line).map_err(|err| Error::parse(source, ln + 1, err.to_string()))?;
            entries.insert(e.hash.clone(), e);
        }
        Ok(Self { entries })
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .values()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn insert(&mut self, entry: CassetteEntry) {
        self.entries.insert(entry.hash.clone(), entry);
    }

    pub fn get(&self, hash: &str) -> Option<&CassetteEntry> {
        self.entries.get(hash)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Serves replies from a cassette; never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    pub cassette: Cassette,
}

impl Transport for ReplayTransport {
    fn send(&self, req: &ChatRequest) -> std::result::Result<Reply, TransportFailure> {
        let h = req.hash();
        self.cassette
            .get(&h)
            .map(|e| Reply {
                status: e.status,
                text: e.response.clone(),
                usage: None,
            })
            .ok_or_else(|| TransportFailure {
                retryable: false,
                message: format!("no recorded response for request {h}"),
            })
    }
}

/// Passes requests through and keeps the last reply per request hash.
pub struct RecordingTransport<T> {
    pub inner: T,
    recorded: Mutex<Cassette>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            recorded: Mutex::new(Cassette::default()),
        }
    }

    pub fn cassette(&self) -> Cassette {
        self.recorded.lock().expect("cassette lock").clone()
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn send(&self, req: &ChatRequest) -> std::result::Result<Reply, TransportFailure> {
        let reply = self.inner.send(req)?;
        self.recorded.lock().expect("cassette lock").insert(CassetteEntry {
            hash: req.hash(),
            response: reply.text.clone(),
            status: reply.status,
        });
        Ok(reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub status: u16,
    pub retries: u32,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
}

fn retryable_status(s: u16) -> bool {
    s == 429 || (500..600).contains(&s)
}

/// One request under the retry policy: 429, 5xx and connection failures
/// are retried with exponential backoff.
pub fn send_with_retry(transport: &dyn Transport, req: &ChatRequest, policy: &RetryPolicy) -> Result<Completion> {
    let start = Instant::now();
    let mut retries = 0;
    loop {
        let (retry, message) = match transport.send(req) {
            Ok(r) if (200..300).contains(&r.status) => {
                return Ok(Completion {
                    text: r.text,
                    status: r.status,
                    retries,
                    latency_ms: start.elapsed().as_millis() as u64,
                    usage: r.usage,
                })
            }
            Ok(r) => (retryable_status(r.status), format!("HTTP {}: {}", r.status, r.text.chars().take(200).collect::<String>())),
            Err(f) => (f.retryable, f.message),
        };
        if !retry || retries >= policy.max_retries {
            return Err(Error::Transport { retries, message });
        }
        retries += 1;
        let wait = policy.backoff(retries);
        log::warn!("request {}: {message}; retry {retries} in {wait:?}", &req.hash()[..12]);
        std::thread::sleep(wait);
    }
}

/// Sends every request with up to `parallelism` in flight. Results are in
/// input order whatever the completion order.
pub fn run_batch(
    transport: &dyn Transport,
    requests: &[ChatRequest],
    policy: &RetryPolicy,
    parallelism: usize,
) -> Result<Vec<Result<Completion>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        requests
            .par_iter()
            .enumerate()
            .map(|(i, req)| {
                let r = send_with_retry(transport, req, policy);
                match &r {
                    Ok(c) => log::info!(
                        "request {i}: {} ms, {} retries, tokens in/out {:?}/{:?}",
                        c.latency_ms,
                        c.retries,
                        c.usage.and_then(|u| u.prompt_tokens),
                        c.usage.and_then(|u| u.completion_tokens)
                    ),
                    Err(e) => log::warn!("request {i} failed: {e}"),
                }
                r
            })
            .collect()
    }))
}
