mod common;

use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use epmem_core::capture::read_caption_fixture;
use epmem_service::api::{AskResponse, ErrorEnvelope, MemoryStats};
use epmem_service::config::ChatConfig;
use epmem_service::server::router;
use epmem_service::{AppConfig, Runtime};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{core_fixture, mock_providers};

fn offline_runtime(dir: &std::path::Path) -> Arc<Runtime> {
    let cfg = AppConfig {
        store_path: dir.join("m.store"),
        ..AppConfig::default()
    };
    Arc::new(Runtime::open(cfg, true).unwrap())
}

async fn call(rt: &Arc<Runtime>, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = router(rt.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn kitchen_body() -> String {
    let captions: Vec<Value> = read_caption_fixture(&core_fixture("kitchen_captions.jsonl"))
        .unwrap()
        .into_iter()
        .map(|c| serde_json::to_value(c).unwrap())
        .collect();
    json!({ "captions": captions }).to_string()
}

#[tokio::test]
async fn health_and_empty_stats() {
    let dir = tempfile::tempdir().unwrap();
    let rt = offline_runtime(dir.path());
    let (s, b) = call(&rt, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b, br#"{"status":"ok"}"#);
    let (_, b) = call(&rt, "GET", "/stats", None).await;
    let stats: MemoryStats = serde_json::from_slice(&b).unwrap();
    assert_eq!(stats.chunk_count, 0);
    assert!(!stats.ingest_in_progress);
}

#[tokio::test]
async fn ingest_then_ask_mug() {
    let dir = tempfile::tempdir().unwrap();
    let rt = offline_runtime(dir.path());
    let (s, b) = call(&rt, "POST", "/ingest/captions", Some(kitchen_body())).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let summary: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(summary["captions"], 480);

    let (_, b) = call(&rt, "GET", "/stats", None).await;
    let stats: MemoryStats = serde_json::from_slice(&b).unwrap();
    assert_eq!(stats.chunk_count as u64, summary["chunks"].as_u64().unwrap());
    assert_eq!(stats.video_ids, vec!["kitchen".to_string()]);
    assert!(stats.store_file_bytes > 0);

    let (s, b) = call(&rt, "POST", "/ask", Some(r#"{"question":"Where is the red mug?"}"#.into())).await;
    assert_eq!(s, StatusCode::OK);
    let a: AskResponse = serde_json::from_slice(&b).unwrap();
    assert!(a.answer.contains("table"), "{}", a.answer);
    assert!(!a.sources.is_empty());
    assert!(!a.fallback_used);

    let (_, b) = call(&rt, "POST", "/ask", Some(r#"{"question":"Where is the red mug?","k":1}"#.into())).await;
    let a: AskResponse = serde_json::from_slice(&b).unwrap();
    assert!(a.sources.len() <= 1);

    // Second ingest of the same video is refused.
    let (s, b) = call(&rt, "POST", "/ingest/captions", Some(kitchen_body())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let e: ErrorEnvelope = serde_json::from_slice(&b).unwrap();
    assert_eq!(e.error, "conflict");
}

#[tokio::test]
async fn errors_use_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let rt = offline_runtime(dir.path());
    for (uri, body, status) in [
        ("/ask", r#"{"question":""}"#, StatusCode::BAD_REQUEST),
        ("/ask", r#"{"question":"x","k":0}"#, StatusCode::BAD_REQUEST),
        ("/ask", "not json", StatusCode::BAD_REQUEST),
        ("/ingest/captions", r#"{"captions":[{"video_id":"v","frame_index":0,"text":" "}]}"#, StatusCode::BAD_REQUEST),
        ("/nope", "{}", StatusCode::NOT_FOUND),
    ] {
        let (s, b) = call(&rt, "POST", uri, Some(body.into())).await;
        assert_eq!(s, status, "{uri} {body}");
        let e: ErrorEnvelope = serde_json::from_slice(&b).unwrap();
        assert!(!e.detail.is_empty() && !e.hint.is_empty());
    }
}

#[tokio::test]
async fn ask_on_empty_memory() {
    let dir = tempfile::tempdir().unwrap();
    let rt = offline_runtime(dir.path());
    let (s, b) = call(&rt, "POST", "/ask", Some(r#"{"question":"anything?"}"#.into())).await;
    assert_eq!(s, StatusCode::OK);
    let a: AskResponse = serde_json::from_slice(&b).unwrap();
    assert_eq!(a.answer, "no memory available");
    assert!(a.sources.is_empty());
}

#[tokio::test]
async fn serves_console_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let web = dir.path().join("web");
    std::fs::create_dir(&web).unwrap();
    std::fs::write(web.join("index.html"), "<h1>console</h1>").unwrap();
    std::fs::write(web.join("app.js"), "console.log(1)").unwrap();
    let mut cfg = AppConfig { store_path: dir.path().join("m.store"), ..AppConfig::default() };
    cfg.server.static_dir = Some(web);
    let rt = Arc::new(Runtime::open(cfg, true).unwrap());
    assert_eq!(call(&rt, "GET", "/", None).await.1, b"<h1>console</h1>");
    assert_eq!(call(&rt, "GET", "/app.js", None).await.1, b"console.log(1)");
    // Client-side routes fall back to the index.
    assert_eq!(call(&rt, "GET", "/history", None).await.1, b"<h1>console</h1>");
    assert_eq!(call(&rt, "GET", "/health", None).await.0, StatusCode::OK);
}

#[test]
fn chat_provider_answers_and_fallback() {
    let (mock, counters) = mock_providers();
    let dir = tempfile::tempdir().unwrap();
    let captions = read_caption_fixture(&core_fixture("kitchen_captions.jsonl")).unwrap();

    let mut cfg = AppConfig { store_path: dir.path().join("a.store"), ..AppConfig::default() };
    cfg.chat = Some(ChatConfig { endpoint: format!("{}/chat", mock.base), ..ChatConfig::default() });
    let rt = Runtime::open(cfg.clone(), false).unwrap();
    rt.ingest_captions(&captions).unwrap();
    let q = epmem_service::AskRequest { question: "Where is the red mug?".into(), ..Default::default() };
    let a = rt.ask(&q).unwrap();
    assert_eq!(a.answer, "mock answer to: Where is the red mug?");
    assert!(!a.fallback_used);
    assert_eq!(a.provider_id, format!("{}/chat", mock.base));
    assert_eq!(counters.chat.load(Ordering::SeqCst), 1);

    cfg.chat = Some(ChatConfig {
        endpoint: format!("{}/chat-fail", mock.base),
        max_retries: 1,
        ..ChatConfig::default()
    });
    cfg.store_path = dir.path().join("b.store");
    let rt = Runtime::open(cfg, false).unwrap();
    rt.ingest_captions(&captions).unwrap();
    let a = rt.ask(&q).unwrap();
    assert!(a.fallback_used);
    assert!(a.warning.is_some());
    assert!(a.answer.contains("table"));
    assert_eq!(counters.chat_fail.load(Ordering::SeqCst), 2);
}

#[test]
fn external_embedder_learns_dim_and_batches() {
    let (mock, counters) = mock_providers();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = AppConfig { store_path: dir.path().join("e.store"), ..AppConfig::default() };
    cfg.embedding.kind = epmem_service::config::EmbeddingKind::External;
    cfg.embedding.endpoint = Some(format!("{}/embed", mock.base));
    let rt = Runtime::open(cfg, false).unwrap();
    assert_eq!(rt.store().read().dim(), common::MOCK_DIM);
    // Many short videos so one ingest embeds more than one batch.
    let captions: Vec<_> = (0..100)
        .map(|i| epmem_core::capture::CaptionRecord {
            video_id: format!("v{i:03}"),
            frame_index: 0,
            timestamp_s: 0.0,
            text: format!("object number {i} on the shelf"),
            encoder_id: "t".into(),
        })
        .collect();
    let s = rt.ingest_captions(&captions).unwrap();
    assert_eq!(s.chunks, 100);
    assert!(counters.max_batch.load(Ordering::SeqCst) <= 64);
    assert!(counters.embed.load(Ordering::SeqCst) >= 3);
    // The mock returns hashed vectors scaled by 3; the client re-normalizes.
    let reference = epmem_core::memory::HashedBowEmbedder::new(common::MOCK_DIM, 9);
    let store = rt.store().read();
    for (chunk, v) in store.items() {
        let want = reference.embed_text(&chunk.text).unwrap();
        for (a, b) in v.iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn external_captioner_receives_frame_bytes() {
    let (mock, counters) = mock_providers();
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    for i in 0..8 {
        std::fs::write(frames.join(format!("{i:04}.jpg")), format!("pixels{i}")).unwrap();
    }
    std::fs::write(frames.join("video.json"), r#"{"video_id":"walk","fps":4}"#).unwrap();
    let mut cfg = AppConfig { store_path: dir.path().join("c.store"), ..AppConfig::default() };
    cfg.caption.kind = epmem_core::capture::CaptionProviderKind::ExternalService;
    cfg.caption.endpoint = Some(format!("{}/caption", mock.base));
    let rt = Runtime::open(cfg, false).unwrap();
    let s = rt.ingest_path(&frames).unwrap();
    assert_eq!((s.frames, s.captions, s.chunks), (8, 8, 1));
    assert_eq!(counters.caption.load(Ordering::SeqCst), 8);
    let text = &rt.store().read().get(0).unwrap().chunk.text;
    assert!(text.starts_with("I see pixels0. I see pixels1."), "{text}");
}
