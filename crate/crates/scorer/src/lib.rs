//! HTTP client for an external text-embedding service.
//!
//! The service speaks plain JSON:
//!
//! * `POST {base}/v1/embed` with `{"texts": [..], "normalize": bool}` answers
//!   `{"vectors": [[..]], "dimension": n, "model": ".."}`
//! * `GET {base}/v1/health` answers `{"dimension": n, "model": ".."}`
//!
//! [`RemoteProvider`] plugs the client into the engine wherever a
//! [`SimilarityProvider`](vasekit_core::similarity::SimilarityProvider) is expected.

mod client;
#[cfg(feature = "mock")]
pub mod mock;
mod provider;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{ClientStats, ScorerClient, ServiceDescriptor};
pub use provider::RemoteProvider;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid scorer config: {0}")]
    Config(String),
    #[error("no texts to embed")]
    EmptyInput,
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("scorer rejected the request with HTTP {status}: {body}")]
    Status { status: u16, body: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base_ms: u64,
    /// Each delay is scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, backoff_base_ms: 250, jitter: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerEndpointConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
    /// Ask the service for unit-length vectors.
    pub normalize: bool,
}

impl Default for ScorerEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            timeout_ms: 10_000,
            max_batch: 64,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            bearer_token: None,
            normalize: false,
        }
    }
}

impl ScorerEndpointConfig {
    pub fn with_base_url(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        let bad = |m: &str| Err(ScorerError::Config(m.to_string()));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ScorerError::Config(format!("base_url must be an http(s) URL, got {:?}", self.base_url)));
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        if self.max_batch == 0 {
            return bad("max_batch must be at least 1");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.retry.jitter) {
            return bad("retry.jitter must lie in [0, 1]");
        }
        Ok(())
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{path}", self.base_url.trim_end_matches('/'))
    }
}
