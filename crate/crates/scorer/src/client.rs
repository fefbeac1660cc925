use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use vasekit_core::similarity::EmbeddingVector;

use crate::{ScorerEndpointConfig, ScorerError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub dimension: usize,
    pub model: String,
}

/// Counters accumulated over the client's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClientStats {
    /// HTTP attempts, including retries.
    pub requests: u64,
    pub retries: u64,
    pub batches: u64,
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    retries: AtomicU64,
    batches: AtomicU64,
}

/// Counting semaphore shared by every clone of a client.
struct Gate {
    used: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
    normalize: bool,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dimension: usize,
    model: String,
}

enum Attempt<T> {
    Done(T),
    Retry(String),
    Fatal(ScorerError),
}

/// Cheap to clone; clones share the in-flight cap and the stats.
#[derive(Clone)]
pub struct ScorerClient {
    cfg: Arc<ScorerEndpointConfig>,
    agent: ureq::Agent,
    gate: Arc<Gate>,
    counters: Arc<Counters>,
}

impl ScorerClient {
    pub fn new(cfg: ScorerEndpointConfig) -> Result<Self, ScorerError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .build()
            .into();
        let gate = Gate { used: Mutex::new(0), freed: Condvar::new(), cap: cfg.max_in_flight };
        Ok(Self { cfg: Arc::new(cfg), agent, gate: Arc::new(gate), counters: Arc::default() })
    }

    pub fn config(&self) -> &ScorerEndpointConfig {
        &self.cfg
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            requests: self.counters.requests.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
            batches: self.counters.batches.load(Ordering::Relaxed),
        }
    }

    pub fn health_check(&self) -> Result<ServiceDescriptor, ScorerError> {
        let url = self.cfg.endpoint("/v1/health");
        self.with_retries(|| {
            let req = self.authorize(self.agent.get(&url));
            classify(req.call(), |body| {
                serde_json::from_str::<ServiceDescriptor>(body)
                    .map_err(|e| ScorerError::Protocol(format!("bad health descriptor: {e}")))
            })
        })
    }

    /// Embeds `texts` in batches of at most `max_batch`, dispatching batches
    /// concurrently up to the in-flight cap. Output order matches input
    /// order. Any failing batch fails the whole call.
    pub fn fetch_embeddings(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ScorerError> {
        if texts.is_empty() {
            return Err(ScorerError::EmptyInput);
        }
        let batches: Vec<&[String]> = texts.chunks(self.cfg.max_batch).collect();
        let results: Vec<Mutex<Option<Result<EmbedResponse, ScorerError>>>> =
            batches.iter().map(|_| Mutex::new(None)).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let failed = std::sync::atomic::AtomicBool::new(false);
        let workers = batches.len().min(self.cfg.max_in_flight);

        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(batch) = batches.get(i) else { break };
                    let r = self.embed_batch(batch);
                    if r.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });

        let mut out = Vec::with_capacity(texts.len());
        let mut first_dim: Option<usize> = None;
        for (i, slot) in results.into_iter().enumerate() {
            let resp = match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
                Some(r) => r?,
                // skipped after another batch failed; that error is reported below
                None => continue,
            };
            match first_dim {
                None => first_dim = Some(resp.dimension),
                Some(d) if d != resp.dimension => {
                    return Err(ScorerError::Protocol(format!(
                        "dimension mismatch across batches: batch 0 returned {d}, batch {i} returned {}",
                        resp.dimension
                    )));
                }
                Some(_) => {}
            }
            for v in resp.vectors {
                out.push(
                    EmbeddingVector::new(v, resp.model.clone())
                        .map_err(|e| ScorerError::Protocol(format!("batch {i}: {e}")))?,
                );
            }
        }
        if out.len() != texts.len() {
            return Err(ScorerError::Protocol(format!("received {} vectors for {} texts", out.len(), texts.len())));
        }
        Ok(out)
    }

    fn embed_batch(&self, batch: &[String]) -> Result<EmbedResponse, ScorerError> {
        self.counters.batches.fetch_add(1, Ordering::Relaxed);
        let url = self.cfg.endpoint("/v1/embed");
        let body = EmbedRequest { texts: batch, normalize: self.cfg.normalize };
        self.with_retries(|| {
            let req = self.authorize(self.agent.post(&url));
            classify(req.send_json(&body), |text| parse_embed(text, batch.len()))
        })
    }

    fn authorize<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match &self.cfg.bearer_token {
            Some(token) => req.header("Authorization", format!("Bearer {token}")),
            None => req,
        }
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut() -> Attempt<T>) -> Result<T, ScorerError> {
        let policy = &self.cfg.retry;
        let mut last = String::new();
        for n in 0..=policy.max_retries {
            if n > 0 {
                self.counters.retries.fetch_add(1, Ordering::Relaxed);
                thread::sleep(self.backoff(n));
            }
            let outcome = {
                let _permit = self.gate.acquire();
                self.counters.requests.fetch_add(1, Ordering::Relaxed);
                attempt()
            };
            match outcome {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(ScorerError::Transport { attempts: policy.max_retries + 1, message: last })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let p = &self.cfg.retry;
        let base = p.backoff_base_ms as f64 * 2f64.powi(retry.saturating_sub(1).min(16) as i32);
        let factor = if p.jitter > 0.0 { rand::rng().random_range(1.0 - p.jitter..=1.0 + p.jitter) } else { 1.0 };
        Duration::from_secs_f64(base * factor / 1000.0)
    }
}

fn classify<T>(
    sent: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    parse: impl FnOnce(&str) -> Result<T, ScorerError>,
) -> Attempt<T> {
    let mut resp = match sent {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = resp.status().as_u16();
    let body = match resp.body_mut().read_to_string() {
        Ok(b) => b,
        Err(e) => return Attempt::Retry(format!("reading response body: {e}")),
    };
    match status {
        200..=299 => match parse(&body) {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fatal(e),
        },
        429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {}", snippet(&body))),
        _ => Attempt::Fatal(ScorerError::Status { status, body: snippet(&body) }),
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(200).collect()
}

fn parse_embed(body: &str, expected: usize) -> Result<EmbedResponse, ScorerError> {
    let resp: EmbedResponse =
        serde_json::from_str(body).map_err(|e| ScorerError::Protocol(format!("bad embed response: {e}")))?;
    if resp.dimension == 0 {
        return Err(ScorerError::Protocol("service reported dimension 0".into()));
    }
    if resp.vectors.len() != expected {
        return Err(ScorerError::Protocol(format!(
            "service returned {} vectors for a batch of {expected}",
            resp.vectors.len()
        )));
    }
    if let Some((i, v)) = resp.vectors.iter().enumerate().find(|(_, v)| v.len() != resp.dimension) {
        return Err(ScorerError::Protocol(format!(
            "vector {i} has length {}, service reported dimension {}",
            v.len(),
            resp.dimension
        )));
    }
    Ok(resp)
}
