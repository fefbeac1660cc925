//! Scriptable in-process embedding service for tests.
//!
//! Embed requests consume scripted [`Reply`] values in arrival order; once
//! the script is exhausted every request gets [`Reply::Echo`] at the
//! server's default dimension. Echoed vectors come from [`echo_vector`], so
//! callers can check which text landed where.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::json;
use tiny_http::{Header, Method, Request, Response, Server};
use vasekit_core::similarity::fnv1a64;

const WORKERS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    /// Echo vectors of the given dimension.
    Echo {
        dimension: usize,
    },
    Status(u16),
    /// Literal 200 body.
    Body(String),
    /// Wait, then answer with the inner reply.
    Delay(Duration, Box<Reply>),
}

impl Reply {
    pub fn echo(dimension: usize) -> Self {
        Reply::Echo { dimension }
    }
}

/// Deterministic vector the mock returns for `text`.
pub fn echo_vector(text: &str, dimension: usize) -> Vec<f64> {
    let h = fnv1a64(text.as_bytes());
    (0..dimension)
        .map(|j| {
            let byte = (h >> ((j % 8) * 8)) & 0xff;
            byte as f64 + (j / 8) as f64 * 0.5 + 1.0
        })
        .collect()
}

struct State {
    dimension: usize,
    model: String,
    script: Mutex<VecDeque<Reply>>,
    health: Mutex<serde_json::Value>,
    latency_ms: AtomicU64,
    embed_requests: AtomicUsize,
    health_requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    batches: Mutex<Vec<Vec<String>>>,
    authorization: Mutex<Option<String>>,
    shutdown: AtomicBool,
}

pub struct MockServer {
    url: String,
    state: Arc<State>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Starts a server on an ephemeral localhost port.
    pub fn start(dimension: usize) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let model = "mock-encoder".to_string();
        let state = Arc::new(State {
            dimension,
            health: Mutex::new(json!({ "dimension": dimension, "model": model })),
            model,
            script: Mutex::default(),
            latency_ms: AtomicU64::new(0),
            embed_requests: AtomicUsize::new(0),
            health_requests: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            batches: Mutex::default(),
            authorization: Mutex::default(),
            shutdown: AtomicBool::new(false),
        });
        let workers = (0..WORKERS)
            .map(|_| {
                let (server, state) = (Arc::clone(&server), Arc::clone(&state));
                thread::spawn(move || {
                    while !state.shutdown.load(Ordering::Relaxed) {
                        if let Ok(Some(req)) = server.recv_timeout(Duration::from_millis(20)) {
                            handle(&state, req);
                        }
                    }
                })
            })
            .collect();
        Self { url: format!("http://127.0.0.1:{port}"), state, workers }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Queues replies for upcoming embed requests.
    pub fn script(&self, replies: impl IntoIterator<Item = Reply>) {
        self.state.script.lock().unwrap().extend(replies);
    }

    /// Replaces the health descriptor body.
    pub fn set_health(&self, body: serde_json::Value) {
        *self.state.health.lock().unwrap() = body;
    }

    /// Added delay for every embed request, to make overlap observable.
    pub fn set_latency(&self, latency: Duration) {
        self.state.latency_ms.store(latency.as_millis() as u64, Ordering::Relaxed);
    }

    pub fn embed_requests(&self) -> usize {
        self.state.embed_requests.load(Ordering::SeqCst)
    }

    pub fn health_requests(&self) -> usize {
        self.state.health_requests.load(Ordering::SeqCst)
    }

    /// Largest number of embed requests ever being handled at once.
    pub fn max_in_flight(&self) -> usize {
        self.state.max_in_flight.load(Ordering::SeqCst)
    }

    /// Texts of every embed request, in arrival order.
    pub fn batches(&self) -> Vec<Vec<String>> {
        self.state.batches.lock().unwrap().clone()
    }

    pub fn last_authorization(&self) -> Option<String> {
        self.state.authorization.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.state.shutdown.store(true, Ordering::Relaxed);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn handle(state: &State, mut req: Request) {
    if let Some(h) = req.headers().iter().find(|h| h.field.equiv("Authorization")) {
        *state.authorization.lock().unwrap() = Some(h.value.to_string());
    }
    let (status, body) = match (req.method(), req.url()) {
        (Method::Get, "/v1/health") => {
            state.health_requests.fetch_add(1, Ordering::SeqCst);
            (200, state.health.lock().unwrap().to_string())
        }
        (Method::Post, "/v1/embed") => {
            let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            state.max_in_flight.fetch_max(now, Ordering::SeqCst);
            state.embed_requests.fetch_add(1, Ordering::SeqCst);
            let out = embed(state, &mut req);
            state.in_flight.fetch_sub(1, Ordering::SeqCst);
            out
        }
        _ => (404, "{\"error\":\"not found\"}".to_string()),
    };
    let json = Header::from_bytes("Content-Type", "application/json").unwrap();
    let _ = req.respond(Response::from_string(body).with_status_code(status).with_header(json));
}

fn embed(state: &State, req: &mut Request) -> (u16, String) {
    let mut raw = String::new();
    if req.as_reader().read_to_string(&mut raw).is_err() {
        return (400, "{\"error\":\"unreadable body\"}".into());
    }
    let texts: Vec<String> = match serde_json::from_str::<serde_json::Value>(&raw)
        .ok()
        .and_then(|v| serde_json::from_value(v.get("texts")?.clone()).ok())
    {
        Some(t) => t,
        None => return (400, "{\"error\":\"expected {\\\"texts\\\": [..]}\"}".into()),
    };
    state.batches.lock().unwrap().push(texts.clone());

    let latency = state.latency_ms.load(Ordering::Relaxed);
    if latency > 0 {
        thread::sleep(Duration::from_millis(latency));
    }
    let mut reply = state.script.lock().unwrap().pop_front().unwrap_or(Reply::echo(state.dimension));
    loop {
        match reply {
            Reply::Delay(d, inner) => {
                thread::sleep(d);
                reply = *inner;
            }
            Reply::Status(code) => return (code, format!("{{\"error\":\"scripted {code}\"}}")),
            Reply::Body(body) => return (200, body),
            Reply::Echo { dimension } => {
                let vectors: Vec<Vec<f64>> = texts.iter().map(|t| echo_vector(t, dimension)).collect();
                let body = json!({ "vectors": vectors, "dimension": dimension, "model": state.model });
                return (200, body.to_string());
            }
        }
    }
}
