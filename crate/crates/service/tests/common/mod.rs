#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use epmem_core::memory::{EmbeddingProvider, HashedBowEmbedder};
use serde_json::{json, Value};

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

/// An HTTP server on its own runtime; stops when dropped.
pub struct MockServer {
    pub base: String,
    _rt: tokio::runtime::Runtime,
}

pub fn spawn(router: Router) -> MockServer {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, router).await.unwrap() });
    MockServer {
        base: format!("http://{addr}"),
        _rt: rt,
    }
}

#[derive(Default)]
pub struct Counters {
    pub caption: AtomicUsize,
    pub embed: AtomicUsize,
    pub chat: AtomicUsize,
    pub chat_fail: AtomicUsize,
    pub max_batch: AtomicUsize,
}

pub const MOCK_DIM: usize = 32;

/// Caption, embedding and chat endpoints following the provider wire formats,
/// plus `/chat-fail` which always answers 503.
pub fn mock_providers() -> (MockServer, Arc<Counters>) {
    let c = Arc::new(Counters::default());
    let (c1, c2, c3, c4) = (c.clone(), c.clone(), c.clone(), c.clone());
    let router = Router::new()
        .route(
            "/caption",
            post(move |Json(body): Json<Value>| async move {
                c1.caption.fetch_add(1, Ordering::SeqCst);
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(body["image_b64"].as_str().unwrap())
                    .unwrap();
                let text = String::from_utf8_lossy(&bytes).to_string();
                Json(json!({ "caption": format!("I see {text}.") }))
            }),
        )
        .route(
            "/embed",
            post(move |Json(body): Json<Value>| async move {
                c2.embed.fetch_add(1, Ordering::SeqCst);
                let texts: Vec<String> = serde_json::from_value(body["texts"].clone()).unwrap();
                c2.max_batch.fetch_max(texts.len(), Ordering::SeqCst);
                let e = HashedBowEmbedder::new(MOCK_DIM, 9);
                let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
                let vectors: Vec<Vec<f32>> = e
                    .embed_batch(&refs)
                    .unwrap()
                    .into_iter()
                    .map(|v| v.as_slice().iter().map(|x| x * 3.0).collect())
                    .collect();
                Json(json!({ "vectors": vectors, "dim": MOCK_DIM }))
            }),
        )
        .route(
            "/chat",
            post(move |Json(body): Json<Value>| async move {
                c3.chat.fetch_add(1, Ordering::SeqCst);
                assert_eq!(body["temperature"].as_f64(), Some(0.0));
                let prompt = body["prompt"].as_str().unwrap();
                let q = prompt
                    .lines()
                    .find_map(|l| l.strip_prefix("Question: "))
                    .unwrap_or("?");
                Json(json!({ "text": format!("mock answer to: {q}") }))
            }),
        )
        .route(
            "/chat-fail",
            post(move || async move {
                c4.chat_fail.fetch_add(1, Ordering::SeqCst);
                StatusCode::SERVICE_UNAVAILABLE
            }),
        );
    (spawn(router), c)
}

pub fn free_port() -> u16 {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().port()
}
