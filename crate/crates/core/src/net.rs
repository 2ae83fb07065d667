//! Blocking HTTP helpers shared by the service clients: JSON GET/POST with
//! bounded exponential-backoff retries and a per-endpoint rate limiter.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

const BODY_EXCERPT_CHARS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("could not decode response: {0}")]
    Decode(String),
}

impl NetError {
    fn is_retryable(&self) -> bool {
        match self {
            NetError::Timeout | NetError::Transport(_) => true,
            NetError::Http { status, .. } => matches!(status, 408 | 429 | 500 | 502 | 503 | 504),
            NetError::Decode(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each subsequent attempt.
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        self.backoff_base.saturating_mul(1u32 << retry.min(16))
    }
}

/// Spaces out requests so that at most `per_second` start in any one-second window.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        let interval = if per_second > 0.0 && per_second.is_finite() {
            Duration::from_secs_f64(1.0 / per_second)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next_slot.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug)]
pub struct HttpClient {
    inner: reqwest::blocking::Client,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
}

impl HttpClient {
    pub fn new(timeout: Duration, retry: RetryPolicy, rate_limit: Option<f64>) -> Result<Self, NetError> {
        let inner = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("kgbuild/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| NetError::Transport(e.to_string()))?;
        Ok(Self {
            inner,
            retry,
            limiter: rate_limit.map(RateLimiter::new),
        })
    }

    pub fn post_json<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &B,
    ) -> Result<R, NetError> {
        self.with_retry(|| {
            let mut req = self.inner.post(url).json(body);
            if let Some(key) = bearer {
                req = req.bearer_auth(key);
            }
            req
        })
    }

    pub fn get_json<R: DeserializeOwned>(
        &self,
        url: &str,
        query: &[(&str, &str)],
        headers: &[(&str, &str)],
    ) -> Result<R, NetError> {
        self.with_retry(|| {
            let mut req = self.inner.get(url).query(query).header("Accept", "application/json");
            for (k, v) in headers {
                req = req.header(*k, *v);
            }
            req
        })
    }

    fn with_retry<R: DeserializeOwned>(
        &self,
        build: impl Fn() -> reqwest::blocking::RequestBuilder,
    ) -> Result<R, NetError> {
        let mut retry = 0;
        loop {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match send_once(build()) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && retry < self.retry.max_retries => {
                    let delay = self.retry.delay_for(retry);
                    log::warn!("request failed ({e}); retry {} in {:?}", retry + 1, delay);
                    thread::sleep(delay);
                    retry += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn send_once<R: DeserializeOwned>(req: reqwest::blocking::RequestBuilder) -> Result<R, NetError> {
    let resp = req.send().map_err(classify)?;
    let status = resp.status();
    let text = resp.text().map_err(classify)?;
    if !status.is_success() {
        return Err(NetError::Http {
            status: status.as_u16(),
            body: excerpt(&text, BODY_EXCERPT_CHARS),
        });
    }
    serde_json::from_str(&text).map_err(|e| NetError::Decode(e.to_string()))
}

fn classify(e: reqwest::Error) -> NetError {
    if e.is_timeout() {
        NetError::Timeout
    } else {
        NetError::Transport(e.to_string())
    }
}

/// First `max_chars` characters of `text`, with an ellipsis when cut.
pub fn excerpt(text: &str, max_chars: usize) -> String {
    let mut chars = text.chars();
    let head: String = chars.by_ref().take(max_chars).collect();
    if chars.next().is_some() {
        format!("{head}…")
    } else {
        head
    }
}
