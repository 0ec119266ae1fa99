//! JSON wire types shared by the HTTP API and the CLI's `--json` output.

use epmem_core::capture::{CaptionRecord, DEFAULT_SAMPLE_RATE_HZ};
use epmem_core::qa::{Answer, Source};
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    pub sources: Vec<Source>,
    pub provider_id: String,
    pub fallback_used: bool,
    pub warning: Option<String>,
}

impl From<Answer> for AskResponse {
    fn from(a: Answer) -> Self {
        Self {
            answer: a.text,
            sources: a.sources,
            provider_id: a.provider_id,
            fallback_used: a.fallback_used,
            warning: a.warning,
        }
    }
}

impl AskResponse {
    /// Human-readable block used by `ask` and the REPL.
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.answer);
        if let Some(w) = &self.warning {
            out.push_str(&format!("warning: {w}\n"));
        }
        if self.sources.is_empty() {
            out.push_str("sources: none\n");
        } else {
            out.push_str("sources:\n");
            for (i, s) in self.sources.iter().enumerate() {
                out.push_str(&format!(
                    "  [{}] video {} @ {:.2}s–{:.2}s (chunk {}, score {:.4})\n",
                    i + 1,
                    s.video_id,
                    s.t_start_s,
                    s.t_end_s,
                    s.chunk_id,
                    s.score
                ));
            }
        }
        out
    }
}

/// One caption in a `POST /ingest/captions` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionInput {
    pub video_id: String,
    pub frame_index: u64,
    #[serde(default)]
    pub timestamp_s: Option<f64>,
    pub text: String,
    #[serde(default)]
    pub encoder_id: Option<String>,
}

impl From<CaptionInput> for CaptionRecord {
    fn from(c: CaptionInput) -> Self {
        CaptionRecord {
            timestamp_s: c
                .timestamp_s
                .unwrap_or(c.frame_index as f64 / DEFAULT_SAMPLE_RATE_HZ),
            video_id: c.video_id,
            frame_index: c.frame_index,
            text: c.text,
            encoder_id: c.encoder_id.unwrap_or_else(|| "api".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestCaptionsRequest {
    pub captions: Vec<CaptionInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub chunk_count: usize,
    pub video_ids: Vec<String>,
    pub total_caption_tokens: u64,
    pub store_file_bytes: u64,
    pub ingest_in_progress: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}

/// Uniform error body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: String,
    pub detail: String,
    pub hint: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NotFound(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("startup failed: {0}")]
    Startup(String),
    #[error(transparent)]
    Core(epmem_core::Error),
}

impl From<epmem_core::Error> for ServiceError {
    fn from(e: epmem_core::Error) -> Self {
        match e {
            epmem_core::Error::Argument(msg) => ServiceError::BadRequest(msg),
            other => ServiceError::Core(other),
        }
    }
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Config(_) => "config",
            ServiceError::Startup(_) => "startup",
            ServiceError::Core(_) => "internal",
        }
    }

    pub fn hint(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "check the request body against the API schema",
            ServiceError::Conflict(_) => "ingest each video once per store, or use a fresh store file",
            ServiceError::NotFound(_) => "see GET /health, GET /stats, POST /ask, POST /ingest/captions",
            ServiceError::Config(_) => "fix the config file or EPMEM_* variables",
            ServiceError::Startup(_) => "check provider endpoints, or run with --offline",
            ServiceError::Core(_) => "see the server log for details",
        }
    }

    pub fn envelope(&self) -> ErrorEnvelope {
        ErrorEnvelope {
            error: self.code().to_string(),
            detail: self.to_string(),
            hint: self.hint().to_string(),
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            ServiceError::BadRequest(_) => 400,
            ServiceError::Conflict(_) => 409,
            ServiceError::NotFound(_) => 404,
            ServiceError::Startup(_) => 503,
            ServiceError::Config(_) | ServiceError::Core(_) => 500,
        }
    }
}
