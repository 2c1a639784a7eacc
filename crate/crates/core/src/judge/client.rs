use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EndpointError {
    /// Worth retrying: transport failures, 429 and 5xx.
    #[error("transient endpoint failure: {0}")]
    Transient(String),
    #[error("endpoint failure: {0}")]
    Fatal(String),
}

/// A chat-completion style LLM service.
pub trait ChatEndpoint: Send + Sync {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, EndpointError>;
}

/// Chat-completion client. Requests use temperature 0 and a single user
/// message holding the prompt; the bearer token comes from the environment.
pub struct HttpChatEndpoint {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

pub const API_KEY_ENV: &str = "LLM_API_KEY";

impl HttpChatEndpoint {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, EndpointError> {
        Self::with_key(base_url, std::env::var(API_KEY_ENV).ok(), timeout)
    }

    pub fn with_key(
        base_url: &str,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, EndpointError> {
        let base = base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EndpointError::Fatal(e.to_string()))?;
        Ok(HttpChatEndpoint {
            url,
            api_key,
            client,
        })
    }

    pub fn request_body(model: &str, prompt: &str) -> Value {
        json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        })
    }
}

impl ChatEndpoint for HttpChatEndpoint {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, EndpointError> {
        let mut req = self
            .client
            .post(&self.url)
            .json(&Self::request_body(model, prompt));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| EndpointError::Transient(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| EndpointError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(EndpointError::Transient(format!("status {status}: {body}")));
        }
        if !status.is_success() {
            return Err(EndpointError::Fatal(format!("status {status}: {body}")));
        }
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| EndpointError::Fatal(format!("bad JSON reply: {e}")))?;
        let choice = &v["choices"][0];
        choice["message"]["content"]
            .as_str()
            .or_else(|| choice["text"].as_str())
            .map(str::to_string)
            .ok_or_else(|| EndpointError::Fatal(format!("reply without content: {body}")))
    }
}

/// Exponential backoff: `base_delay * 2^attempt`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Spaces requests at least `min_interval` apart.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        RateLimiter {
            min_interval,
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.min_interval);
            slot.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(10),
            max_delay: Duration::from_millis(35),
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(1), Duration::from_millis(20));
        assert_eq!(p.delay(2), Duration::from_millis(35));
        assert_eq!(p.delay(40), Duration::from_millis(35));
    }

    #[test]
    fn request_body_shape() {
        let body = HttpChatEndpoint::request_body("gpt-4", "hello");
        assert_eq!(
            body,
            json!({"model": "gpt-4", "messages": [{"role": "user", "content": "hello"}], "temperature": 0})
        );
    }

    #[test]
    fn rate_limiter_spaces_calls() {
        let l = RateLimiter::new(Duration::from_millis(20));
        let t = Instant::now();
        for _ in 0..3 {
            l.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(40));
    }
}
