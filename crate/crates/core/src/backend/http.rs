//! Blocking client for the `/v1/generate` wire protocol.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::{Backend, GenerationRequest, GenerationResult};
use crate::error::BackendError;

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// Upper bound on requests in flight across all threads using the client.
    pub max_in_flight: usize,
    /// Total attempts per request, including the first one.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            max_in_flight: 8,
            max_attempts: 3,
            initial_backoff: Duration::from_millis(50),
            max_backoff: Duration::from_secs(2),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Counting semaphore.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Limiter {
        Limiter {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    base_url: String,
    agent: ureq::Agent,
    options: ClientOptions,
    limiter: Limiter,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> HttpBackend {
        HttpBackend::with_options(base_url, ClientOptions::default())
    }

    pub fn with_options(base_url: impl Into<String>, options: ClientOptions) -> HttpBackend {
        let agent = ureq::AgentBuilder::new().timeout(options.timeout).build();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            limiter: Limiter::new(options.max_in_flight),
            options,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// `GET /v1/health`; succeeds when the server answers `{"status":"ok"}`.
    pub fn health(&self) -> Result<(), BackendError> {
        let response = self
            .agent
            .get(&format!("{}/v1/health", self.base_url))
            .call()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let body: serde_json::Value = response
            .into_json()
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        if body.get("status").and_then(|s| s.as_str()) == Some("ok") {
            Ok(())
        } else {
            Err(BackendError::MalformedResponse(format!("unexpected health body {body}")))
        }
    }

    fn attempt(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let url = format!("{}/v1/generate", self.base_url);
        match self.agent.post(&url).send_json(request) {
            Ok(response) => {
                let body = response
                    .into_string()
                    .map_err(|e| BackendError::Unavailable(format!("reading response: {e}")))?;
                let result: GenerationResult =
                    serde_json::from_str(&body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
                result.validate_for(request)?;
                Ok(result)
            }
            Err(ureq::Error::Status(code, response)) => {
                let body = response.into_string().unwrap_or_default();
                Err(match code {
                    413 => BackendError::InputTooLong(body),
                    400..=499 => BackendError::BadRequest(format!("HTTP {code}: {body}")),
                    _ => BackendError::Unavailable(format!("HTTP {code}: {body}")),
                })
            }
            Err(ureq::Error::Transport(t)) => Err(BackendError::Unavailable(t.to_string())),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.options
            .initial_backoff
            .saturating_mul(factor)
            .min(self.options.max_backoff)
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let _permit = self.limiter.acquire();
        let attempts = self.options.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.attempt(request) {
                Err(BackendError::Unavailable(msg)) if attempt < attempts => {
                    let wait = self.backoff(attempt);
                    log::warn!("backend unavailable (attempt {attempt}/{attempts}): {msg}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
