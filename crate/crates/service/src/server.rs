//! HTTP API and console hosting.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use epmem_core::capture::CaptionRecord;
use serde::de::DeserializeOwned;
use tower_http::services::{ServeDir, ServeFile};

use crate::api::{AskRequest, Health, IngestCaptionsRequest, ServiceError};
use crate::runtime::Runtime;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if matches!(self, ServiceError::Core(_)) {
            tracing::error!(error = %self, "request failed");
        }
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.envelope())).into_response()
    }
}

// Parsed by hand so malformed bodies get the standard envelope.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Startup(format!("worker task failed: {e}")))?
}

/// Serialized exactly as `epmem ask --json` prints it.
fn json_response<T: serde::Serialize>(value: &T) -> Response {
    let body = serde_json::to_string(value).expect("wire types serialize");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn health() -> Response {
    json_response(&Health { status: "ok".into() })
}

async fn stats(State(rt): State<Arc<Runtime>>) -> Response {
    json_response(&rt.stats())
}

async fn ask(State(rt): State<Arc<Runtime>>, body: Bytes) -> Result<Response, ServiceError> {
    let req: AskRequest = parse_body(&body)?;
    let resp = blocking(move || rt.ask(&req)).await?;
    Ok(json_response(&resp))
}

async fn ingest_captions(State(rt): State<Arc<Runtime>>, body: Bytes) -> Result<Response, ServiceError> {
    let req: IngestCaptionsRequest = parse_body(&body)?;
    let records: Vec<CaptionRecord> = req.captions.into_iter().map(Into::into).collect();
    if let Some(bad) = records.iter().position(|r| r.text.trim().is_empty()) {
        return Err(ServiceError::BadRequest(format!("caption {bad} has empty text")));
    }
    let summary = blocking(move || rt.ingest_captions(&records)).await?;
    Ok(json_response(&summary))
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>epmem</title>\
<p>No console bundle configured. Set <code>server.static_dir</code> or \
<code>EPMEM_STATIC_DIR</code>. The JSON API is at <code>/ask</code>, \
<code>/stats</code>, <code>/health</code>.</p>";

async fn not_found() -> ServiceError {
    ServiceError::NotFound("no such route".into())
}

pub fn router(rt: Arc<Runtime>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/stats", get(stats))
        .route("/ask", post(ask))
        .route("/ingest/captions", post(ingest_captions));
    let api = match rt.config().server.static_dir.clone() {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api
            .route("/", get(|| async { Html(PLACEHOLDER_INDEX) }))
            .fallback(not_found),
    };
    api.with_state(rt)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(rt: Arc<Runtime>) -> anyhow::Result<()> {
    let addr = rt.config().server.addr()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    eprintln!("epmem listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(rt))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
