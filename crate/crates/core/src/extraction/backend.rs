//! Generation backends: OpenAI-compatible chat, a seq2seq inference endpoint,
//! and a replay backend that serves recorded completions from disk.

use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::seq2seq::MarkerOrder;
use crate::chunking::{Tokenizer, DEFAULT_SEQ2SEQ_LIMIT};
use crate::net::{HttpClient, NetError, RetryPolicy};

pub const DEFAULT_CHAT_LIMIT: usize = 4096;
pub const DEFAULT_CHAT_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_SEQ2SEQ_KEY_ENV: &str = "HF_API_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Seq2seqTokens,
    ChatTriples,
    ChatOntology,
    Replay,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("input has {tokens} tokens, limit is {limit}")]
    TokenLimitExceeded { tokens: usize, limit: usize },
    #[error("no replay fixture {0}.txt")]
    MissingFixture(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response shape: {0}")]
    Decode(String),
    #[error("fixture I/O error: {0}")]
    Io(String),
}

impl From<NetError> for GenerateError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Timeout => GenerateError::Timeout,
            NetError::Http { status, body } => GenerateError::HttpError { status, body },
            NetError::Transport(m) => GenerateError::Transport(m),
            NetError::Decode(m) => GenerateError::Decode(m),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("backend {id}: {reason}")]
    Invalid { id: String, reason: String },
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    /// Defaults to 512 for seq2seq and 4096 for chat kinds.
    #[serde(default)]
    pub max_input_tokens: Option<usize>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
    /// Replay only: directory of `<hash>.txt` fixtures.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    /// Replay only: which live kind the recordings stand in for.
    #[serde(default)]
    pub emulates: Option<BackendKind>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub rate_limit_per_sec: Option<f64>,
    #[serde(default)]
    pub marker_order: MarkerOrder,
}

impl BackendConfig {
    pub fn new(backend_id: impl Into<String>, kind: BackendKind) -> Self {
        Self {
            backend_id: backend_id.into(),
            kind,
            endpoint: None,
            model_name: String::new(),
            temperature: 0.0,
            max_input_tokens: None,
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_base_ms: default_backoff(),
            fixture_dir: None,
            emulates: None,
            api_key_env: None,
            rate_limit_per_sec: None,
            marker_order: MarkerOrder::default(),
        }
    }

    pub fn replay(backend_id: impl Into<String>, fixture_dir: impl Into<PathBuf>, emulates: BackendKind) -> Self {
        let mut c = Self::new(backend_id, BackendKind::Replay);
        c.fixture_dir = Some(fixture_dir.into());
        c.emulates = Some(emulates);
        c
    }

    /// The live kind whose request/response shape this backend follows.
    pub fn effective_kind(&self) -> BackendKind {
        match self.kind {
            BackendKind::Replay => self.emulates.unwrap_or(BackendKind::Seq2seqTokens),
            k => k,
        }
    }

    pub fn input_limit(&self) -> usize {
        self.max_input_tokens.unwrap_or(match self.effective_kind() {
            BackendKind::Seq2seqTokens => DEFAULT_SEQ2SEQ_LIMIT,
            _ => DEFAULT_CHAT_LIMIT,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |reason: &str| {
            Err(ConfigError::Invalid {
                id: self.backend_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.backend_id.trim().is_empty() {
            return fail("backend_id is empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return fail("temperature must be within [0, 2]");
        }
        if self.max_input_tokens == Some(0) {
            return fail("max_input_tokens must be positive");
        }
        if !(self.request_timeout_secs > 0.0 && self.request_timeout_secs.is_finite()) {
            return fail("request_timeout_secs must be positive");
        }
        match self.kind {
            BackendKind::Replay => {
                if self.fixture_dir.is_none() {
                    return fail("replay backend requires fixture_dir");
                }
                if self.emulates == Some(BackendKind::Replay) {
                    return fail("replay backend cannot emulate replay");
                }
            }
            _ => {
                if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    return fail("endpoint is required");
                }
                if self.emulates.is_some() {
                    return fail("emulates is only valid for replay backends");
                }
            }
        }
        Ok(())
    }

    fn api_key(&self) -> Option<String> {
        let var = self.api_key_env.clone().unwrap_or_else(|| {
            match self.effective_kind() {
                BackendKind::Seq2seqTokens => DEFAULT_SEQ2SEQ_KEY_ENV,
                _ => DEFAULT_CHAT_KEY_ENV,
            }
            .to_string()
        });
        std::env::var(var).ok().filter(|k| !k.is_empty())
    }
}

/// Fixture key: SHA-256 over the canonical JSON of model, temperature and input.
pub fn replay_key(model_name: &str, temperature: f64, input: &str) -> String {
    let canonical = serde_json::json!({
        "input": input,
        "model": model_name,
        "temperature": temperature,
    })
    .to_string();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Serialize)]
struct Seq2seqRequest<'a> {
    inputs: &'a str,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Seq2seqResponse {
    One { generated_text: String },
    Many(Vec<Seq2seqItem>),
}

#[derive(Deserialize)]
struct Seq2seqItem {
    generated_text: String,
}

/// A configured backend, shareable across worker threads.
pub struct Backend {
    config: BackendConfig,
    tokenizer: Arc<dyn Tokenizer>,
    http: Option<HttpClient>,
    api_key: Option<String>,
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backend")
            .field("config", &self.config)
            .field("tokenizer", &self.tokenizer.name())
            .finish()
    }
}

impl Backend {
    pub fn new(config: BackendConfig, tokenizer: Arc<dyn Tokenizer>) -> Result<Self, ConfigError> {
        config.validate()?;
        let http = match config.kind {
            BackendKind::Replay => None,
            _ => Some(
                HttpClient::new(
                    Duration::from_secs_f64(config.request_timeout_secs),
                    RetryPolicy {
                        max_retries: config.max_retries,
                        backoff_base: Duration::from_millis(config.backoff_base_ms),
                    },
                    config.rate_limit_per_sec,
                )
                .map_err(|e| ConfigError::Invalid {
                    id: config.backend_id.clone(),
                    reason: e.to_string(),
                })?,
            ),
        };
        let api_key = config.api_key();
        Ok(Self {
            config,
            tokenizer,
            http,
            api_key,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn id(&self) -> &str {
        &self.config.backend_id
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    pub fn replay_key(&self, input: &str) -> String {
        replay_key(&self.config.model_name, self.config.temperature, input)
    }

    /// Raw completion text for `input`. Seq2seq inputs are checked against the
    /// token limit before any request is made.
    pub fn generate(&self, input: &str) -> Result<String, GenerateError> {
        if self.config.effective_kind() == BackendKind::Seq2seqTokens {
            let tokens = self.tokenizer.tokenize(input).len();
            let limit = self.config.input_limit();
            if tokens > limit {
                return Err(GenerateError::TokenLimitExceeded { tokens, limit });
            }
        }
        match self.config.kind {
            BackendKind::Replay => self.replay(input),
            BackendKind::Seq2seqTokens => self.post_seq2seq(input),
            BackendKind::ChatTriples | BackendKind::ChatOntology => self.post_chat(input),
        }
    }

    fn replay(&self, input: &str) -> Result<String, GenerateError> {
        let key = self.replay_key(input);
        let dir = self.config.fixture_dir.as_ref().expect("validated");
        match fs::read_to_string(dir.join(format!("{key}.txt"))) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(GenerateError::MissingFixture(key)),
            Err(e) => Err(GenerateError::Io(e.to_string())),
        }
    }

    fn post_chat(&self, input: &str) -> Result<String, GenerateError> {
        let body = ChatRequest {
            model: &self.config.model_name,
            temperature: self.config.temperature,
            messages: vec![ChatMessage {
                role: "user",
                content: input,
            }],
        };
        let resp: ChatResponse = self.http().post_json(self.endpoint(), self.api_key.as_deref(), &body)?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GenerateError::Decode("no message content in first choice".into()))
    }

    fn post_seq2seq(&self, input: &str) -> Result<String, GenerateError> {
        let resp: Seq2seqResponse =
            self.http()
                .post_json(self.endpoint(), self.api_key.as_deref(), &Seq2seqRequest { inputs: input })?;
        match resp {
            Seq2seqResponse::One { generated_text } => Ok(generated_text),
            Seq2seqResponse::Many(items) => items
                .into_iter()
                .next()
                .map(|i| i.generated_text)
                .ok_or_else(|| GenerateError::Decode("empty generation list".into())),
        }
    }

    fn http(&self) -> &HttpClient {
        self.http.as_ref().expect("live backends always have a client")
    }

    fn endpoint(&self) -> &str {
        self.config.endpoint.as_deref().expect("validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::WhitespaceTokenizer;

    #[test]
    fn replay_returns_fixture_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Backend::new(
            BackendConfig::replay("r", dir.path(), BackendKind::Seq2seqTokens),
            Arc::new(WhitespaceTokenizer),
        )
        .unwrap();
        let p = "some input text";
        let out = "<triplet> A <subj> r <obj> B";
        fs::write(dir.path().join(format!("{}.txt", backend.replay_key(p))), out).unwrap();
        assert_eq!(backend.generate(p).unwrap(), out);
        assert!(matches!(backend.generate("other"), Err(GenerateError::MissingFixture(_))));
    }

    #[test]
    fn seq2seq_limit_is_checked_before_sending() {
        let mut cfg = BackendConfig::new("rebel", BackendKind::Seq2seqTokens);
        // unroutable; the limit check must fire first
        cfg.endpoint = Some("http://127.0.0.1:9/".into());
        let backend = Backend::new(cfg, Arc::new(WhitespaceTokenizer)).unwrap();
        let input = vec!["tok"; 600].join(" ");
        assert_eq!(
            backend.generate(&input),
            Err(GenerateError::TokenLimitExceeded { tokens: 600, limit: 512 })
        );
    }

    #[test]
    fn replay_key_depends_on_all_request_parts() {
        let k = replay_key("m", 0.0, "p");
        assert_eq!(k.len(), 64);
        assert_ne!(k, replay_key("m2", 0.0, "p"));
        assert_ne!(k, replay_key("m", 0.5, "p"));
        assert_ne!(k, replay_key("m", 0.0, "p "));
        assert_eq!(k, replay_key("m", 0.0, "p"));
    }

    #[test]
    fn config_validation() {
        let mut c = BackendConfig::new("chat", BackendKind::ChatTriples);
        assert!(c.validate().is_err(), "endpoint required");
        c.endpoint = Some("http://localhost/v1/chat/completions".into());
        assert!(c.validate().is_ok());
        c.temperature = 2.5;
        assert!(c.validate().is_err());
        let mut r = BackendConfig::new("r", BackendKind::Replay);
        assert!(r.validate().is_err(), "fixture dir required");
        r.fixture_dir = Some("x".into());
        assert!(r.validate().is_ok());
        assert_eq!(r.effective_kind(), BackendKind::Seq2seqTokens);
        assert_eq!(r.input_limit(), 512);
    }

    #[test]
    fn chat_defaults_to_zero_temperature() {
        let c: BackendConfig =
            serde_json::from_str(r#"{"backend_id":"gpt","kind":"chat_triples","endpoint":"http://x"}"#).unwrap();
        assert_eq!(c.temperature, 0.0);
        assert_eq!(c.input_limit(), DEFAULT_CHAT_LIMIT);
    }
}
