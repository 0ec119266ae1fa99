//! Blocking HTTP clients for external caption, embedding and chat models.
//!
//! Call these from plain threads or `spawn_blocking`, never directly on an
//! async executor thread.

use std::time::Duration;

use base64::Engine;
use epmem_core::capture::{CaptionProvider, Frame};
use epmem_core::memory::{EmbeddingProvider, EmbeddingVector};
use epmem_core::qa::{ChatOptions, ChatProvider};
use epmem_core::retry::RetryPolicy;
use epmem_core::ProviderError;
use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

fn client(timeout_ms: u64) -> Result<Client, ProviderError> {
    Client::builder()
        .timeout(Duration::from_millis(timeout_ms))
        .build()
        .map_err(|e| ProviderError::Unavailable(e.to_string()))
}

fn post_json<B: Serialize, R: DeserializeOwned>(
    client: &Client,
    endpoint: &str,
    body: &B,
) -> Result<R, ProviderError> {
    let resp = client.post(endpoint).json(body).send().map_err(|e| {
        if e.is_timeout() {
            ProviderError::Timeout { attempts: 1 }
        } else {
            ProviderError::Unavailable(e.to_string())
        }
    })?;
    let status = resp.status();
    if status.is_server_error() || status.as_u16() == 429 {
        return Err(ProviderError::Unavailable(format!("{endpoint} returned {status}")));
    }
    if !status.is_success() {
        return Err(ProviderError::Malformed(format!("{endpoint} returned {status}")));
    }
    resp.json()
        .map_err(|e| ProviderError::Malformed(format!("{endpoint}: {e}")))
}

#[derive(Serialize)]
struct CaptionRequest<'a> {
    image_b64: String,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

pub struct HttpCaptioner {
    endpoint: String,
    client: Client,
    retry: RetryPolicy,
}

impl HttpCaptioner {
    pub fn new(endpoint: &str, timeout_ms: u64, max_retries: u32) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: endpoint.to_string(),
            client: client(timeout_ms)?,
            retry: RetryPolicy::new(max_retries),
        })
    }
}

impl CaptionProvider for HttpCaptioner {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn describe(&self, frame: &Frame, prompt: &str) -> Result<String, ProviderError> {
        let bytes = frame
            .payload
            .read_bytes()
            .map_err(|e| ProviderError::Malformed(format!("frame payload: {e}")))?;
        let body = CaptionRequest {
            image_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
            prompt,
        };
        self.retry
            .run(|| post_json::<_, CaptionResponse>(&self.client, &self.endpoint, &body))
            .map(|r| r.caption)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
    dim: usize,
}

/// Learns its dimension from a probe request at construction.
pub struct HttpEmbedder {
    endpoint: String,
    client: Client,
    retry: RetryPolicy,
    dim: usize,
}

const PROBE_TEXT: &str = "dimension probe";

impl HttpEmbedder {
    pub fn connect(endpoint: &str, timeout_ms: u64, max_retries: u32) -> Result<Self, ProviderError> {
        let mut e = Self {
            endpoint: endpoint.to_string(),
            client: client(timeout_ms)?,
            retry: RetryPolicy::new(max_retries),
            dim: 0,
        };
        let probe = e.request(&[PROBE_TEXT])?;
        e.dim = probe.dim;
        if e.dim == 0 {
            return Err(ProviderError::Malformed("embedding provider announced dim 0".into()));
        }
        Ok(e)
    }

    fn request(&self, texts: &[&str]) -> Result<EmbedResponse, ProviderError> {
        let resp: EmbedResponse = self
            .retry
            .run(|| post_json(&self.client, &self.endpoint, &EmbedRequest { texts }))?;
        if resp.vectors.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        Ok(resp)
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let resp = self.request(texts)?;
        if resp.dim != self.dim {
            return Err(ProviderError::Malformed(format!(
                "dimension changed from {} to {}",
                self.dim, resp.dim
            )));
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(ProviderError::Malformed(format!(
                        "vector of length {} for dim {}",
                        v.len(),
                        self.dim
                    )));
                }
                EmbeddingVector::normalized(v).map_err(|e| ProviderError::Malformed(e.to_string()))
            })
            .collect()
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f32,
}

#[derive(Deserialize)]
struct ChatResponse {
    text: String,
}

pub struct HttpChat {
    endpoint: String,
    client: Client,
    retry: RetryPolicy,
}

impl HttpChat {
    pub fn new(endpoint: &str, timeout_ms: u64, max_retries: u32) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: endpoint.to_string(),
            client: client(timeout_ms)?,
            retry: RetryPolicy::new(max_retries),
        })
    }
}

impl ChatProvider for HttpChat {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn complete(&self, prompt: &str, options: &ChatOptions) -> Result<String, ProviderError> {
        let body = ChatRequest {
            prompt,
            max_tokens: options.max_tokens,
            temperature: options.temperature,
        };
        self.retry
            .run(|| post_json::<_, ChatResponse>(&self.client, &self.endpoint, &body))
            .map(|r| r.text)
    }
}
