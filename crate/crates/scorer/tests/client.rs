use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use vasekit_core::similarity::SimilarityProvider;
use vasekit_scorer::mock::{echo_vector, MockServer, Reply};
use vasekit_scorer::{RemoteProvider, RetryPolicy, ScorerClient, ScorerEndpointConfig, ScorerError};

fn config(url: &str) -> ScorerEndpointConfig {
    ScorerEndpointConfig {
        retry: RetryPolicy { max_retries: 3, backoff_base_ms: 5, jitter: 0.2 },
        timeout_ms: 2_000,
        ..ScorerEndpointConfig::with_base_url(url)
    }
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("text number {i}")).collect()
}

#[test]
fn batches_and_keeps_order() {
    let mock = MockServer::start(8);
    let client = ScorerClient::new(ScorerEndpointConfig { max_batch: 2, ..config(mock.url()) }).unwrap();
    let input = texts(3);
    let out = client.fetch_embeddings(&input).unwrap();
    assert_eq!(mock.embed_requests(), 2);
    assert_eq!(out.len(), 3);
    for (t, v) in input.iter().zip(&out) {
        assert_eq!(v.values(), echo_vector(t, 8).as_slice());
        assert_eq!(v.provider(), "mock-encoder");
    }
    let mut sizes: Vec<usize> = mock.batches().iter().map(Vec::len).collect();
    sizes.sort();
    assert_eq!(sizes, [1, 2]);
}

#[test]
fn retries_after_server_error() {
    let mock = MockServer::start(4);
    mock.script([Reply::Status(500)]);
    let client = ScorerClient::new(config(mock.url())).unwrap();
    let out = client.fetch_embeddings(&texts(2)).unwrap();
    assert_eq!(out.len(), 2);
    let stats = client.stats();
    assert_eq!(stats.retries, 1);
    assert_eq!(stats.requests, 2);
}

#[test]
fn retry_yields_same_output_as_clean_success() {
    let mock = MockServer::start(4);
    let clean = ScorerClient::new(config(mock.url())).unwrap().fetch_embeddings(&texts(5)).unwrap();
    mock.script([Reply::Status(503), Reply::Status(429)]);
    let retried = ScorerClient::new(config(mock.url())).unwrap().fetch_embeddings(&texts(5)).unwrap();
    assert_eq!(clean, retried);
}

#[test]
fn timeout_is_retried() {
    let mock = MockServer::start(4);
    mock.script([Reply::Delay(Duration::from_millis(600), Box::new(Reply::echo(4)))]);
    let client = ScorerClient::new(ScorerEndpointConfig { timeout_ms: 150, ..config(mock.url()) }).unwrap();
    let out = client.fetch_embeddings(&texts(1)).unwrap();
    assert_eq!(out[0].values(), echo_vector("text number 0", 4).as_slice());
    assert!(client.stats().retries >= 1);
}

#[test]
fn client_error_is_not_retried() {
    let mock = MockServer::start(4);
    mock.script([Reply::Status(400)]);
    let client = ScorerClient::new(config(mock.url())).unwrap();
    let err = client.fetch_embeddings(&texts(1)).unwrap_err();
    assert!(matches!(err, ScorerError::Status { status: 400, .. }), "{err}");
    assert_eq!(mock.embed_requests(), 1);
}

#[test]
fn exhausted_retries_are_transport_errors() {
    let mock = MockServer::start(4);
    mock.script(std::iter::repeat_n(Reply::Status(502), 4));
    let client = ScorerClient::new(config(mock.url())).unwrap();
    let err = client.fetch_embeddings(&texts(1)).unwrap_err();
    assert!(matches!(err, ScorerError::Transport { attempts: 4, .. }), "{err}");
}

#[test]
fn dimension_mismatch_across_batches() {
    let mock = MockServer::start(512);
    mock.script([Reply::echo(512), Reply::echo(768)]);
    // one worker so the scripted replies map onto batches in order
    let cfg = ScorerEndpointConfig { max_batch: 2, max_in_flight: 1, ..config(mock.url()) };
    let err = ScorerClient::new(cfg).unwrap().fetch_embeddings(&texts(4)).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, ScorerError::Protocol(_)));
    assert!(msg.contains("512") && msg.contains("768"), "{msg}");
}

#[test]
fn malformed_bodies_are_protocol_errors() {
    let mock = MockServer::start(4);
    mock.script([
        Reply::Body("not json".into()),
        Reply::Body(r#"{"vectors": [[1.0, 2.0]], "dimension": 3, "model": "m"}"#.into()),
        Reply::Body(r#"{"vectors": [], "dimension": 2, "model": "m"}"#.into()),
    ]);
    let client = ScorerClient::new(config(mock.url())).unwrap();
    for _ in 0..3 {
        assert!(matches!(client.fetch_embeddings(&texts(1)), Err(ScorerError::Protocol(_))));
    }
}

#[test]
fn empty_input_rejected() {
    let client = ScorerClient::new(config("http://127.0.0.1:9")).unwrap();
    assert!(matches!(client.fetch_embeddings(&[]), Err(ScorerError::EmptyInput)));
}

#[test]
fn unreachable_host_fails_within_budget() {
    let cfg = ScorerEndpointConfig { timeout_ms: 500, ..config("http://127.0.0.1:1") };
    let started = Instant::now();
    let err = ScorerClient::new(cfg).unwrap().health_check().unwrap_err();
    assert!(matches!(err, ScorerError::Transport { attempts: 4, .. }), "{err}");
    // 4 attempts of at most 500 ms plus backoff of at most 6 + 12 + 24 ms
    assert!(started.elapsed() < Duration::from_millis(4 * 500 + 100));
}

#[test]
fn health_check_descriptor() {
    let mock = MockServer::start(512);
    let client = ScorerClient::new(config(mock.url())).unwrap();
    let d = client.health_check().unwrap();
    assert_eq!(d.dimension, 512);
    assert_eq!(d.model, "mock-encoder");

    mock.set_health(serde_json::json!({ "model": "no-dimension" }));
    assert!(matches!(client.health_check(), Err(ScorerError::Protocol(_))));
}

#[test]
fn bearer_token_is_sent() {
    let mock = MockServer::start(4);
    let cfg = ScorerEndpointConfig { bearer_token: Some("s3cret".into()), ..config(mock.url()) };
    ScorerClient::new(cfg).unwrap().health_check().unwrap();
    assert_eq!(mock.last_authorization().as_deref(), Some("Bearer s3cret"));
}

#[test]
fn config_validation() {
    for bad in [
        ScorerEndpointConfig { max_batch: 0, ..ScorerEndpointConfig::default() },
        ScorerEndpointConfig { timeout_ms: 0, ..ScorerEndpointConfig::default() },
        ScorerEndpointConfig { max_in_flight: 0, ..ScorerEndpointConfig::default() },
        ScorerEndpointConfig::with_base_url("localhost:8080"),
    ] {
        assert!(matches!(ScorerClient::new(bad), Err(ScorerError::Config(_))));
    }
    let parsed: ScorerEndpointConfig =
        serde_json::from_str(r#"{"base_url": "http://x", "retry": {"max_retries": 0}}"#).unwrap();
    assert_eq!(parsed.retry.backoff_base_ms, 250);
    assert_eq!(parsed.max_batch, 64);
    assert!(serde_json::from_str::<ScorerEndpointConfig>(r#"{"batch": 3}"#).is_err());
}

#[test]
fn concurrency_cap_holds_across_callers() {
    let mock = MockServer::start(4);
    mock.set_latency(Duration::from_millis(5));
    let cfg = ScorerEndpointConfig { max_batch: 1, max_in_flight: 4, ..config(mock.url()) };
    let client = Arc::new(ScorerClient::new(cfg).unwrap());
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let client = Arc::clone(&client);
            thread::spawn(move || client.fetch_embeddings(&texts(1 + i % 3)).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert!(mock.max_in_flight() <= 4, "saw {} concurrent requests", mock.max_in_flight());
    assert!(mock.max_in_flight() > 1);
    assert_eq!(mock.embed_requests(), (0..100).map(|i| 1 + i % 3).sum::<usize>());
}

#[test]
fn remote_provider_matches_descriptor() {
    let mock = MockServer::start(16);
    let provider = RemoteProvider::connect(config(mock.url())).unwrap();
    assert_eq!(provider.dimension(), 16);
    assert_eq!(provider.tag(), "mock-encoder");
    let sim = provider.similarity("attic amphora", "attic amphora").unwrap();
    assert!((sim - 1.0).abs() < 1e-12);

    mock.script([Reply::echo(8)]);
    assert!(provider.embed_batch(&texts(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_follows_input_order(
        input in prop::collection::vec("[a-z ]{0,12}", 1..40),
        max_batch in 1usize..7,
        max_in_flight in 1usize..5,
    ) {
        let mock = MockServer::start(6);
        let cfg = ScorerEndpointConfig { max_batch, max_in_flight, ..config(mock.url()) };
        let out = ScorerClient::new(cfg).unwrap().fetch_embeddings(&input).unwrap();
        prop_assert_eq!(out.len(), input.len());
        for (t, v) in input.iter().zip(&out) {
            prop_assert_eq!(v.values().to_vec(), echo_vector(t, 6));
        }
        prop_assert_eq!(mock.embed_requests(), input.len().div_ceil(max_batch));
    }
}
