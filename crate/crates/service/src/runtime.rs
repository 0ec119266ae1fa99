//! A loaded memory plus its providers. Shared by every front end.

use std::collections::BTreeSet;
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use epmem_core::capture::{
    read_caption_fixture, sample_frames, CaptionProvider, CaptionProviderKind, CaptionRecord,
    ScriptedCaptioner, StubCaptioner,
};
use epmem_core::ingest::{ingest_captions, ingest_frames, IngestSummary};
use epmem_core::memory::{
    load, persist, EmbeddingProvider, HashedBowEmbedder, MemoryStore, MetadataFilter, SharedStore,
};
use epmem_core::qa::{Agent, AgentConfig, ChatOptions, ChatProvider, MemoryQuery, PromptTemplate};
use parking_lot::Mutex;

use crate::api::{AskRequest, AskResponse, MemoryStats, ServiceError};
use crate::config::{AppConfig, EmbeddingKind};
use crate::providers::{HttpCaptioner, HttpChat, HttpEmbedder};

const PROBE_TIMEOUT: Duration = Duration::from_secs(3);

fn check_reachable(what: &str, endpoint: &str) -> Result<(), ServiceError> {
    let unreachable = |why: String| ServiceError::Startup(format!("{what} provider at {endpoint} is unreachable: {why}"));
    let url = reqwest::Url::parse(endpoint).map_err(|e| unreachable(e.to_string()))?;
    let addrs = url.socket_addrs(|| None).map_err(|e| unreachable(e.to_string()))?;
    let mut last = String::from("no address");
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, PROBE_TIMEOUT) {
            Ok(_) => return Ok(()),
            Err(e) => last = e.to_string(),
        }
    }
    Err(unreachable(last))
}

pub(crate) fn build_embedder(cfg: &AppConfig) -> Result<Arc<dyn EmbeddingProvider>, ServiceError> {
    let e = &cfg.embedding;
    match e.kind {
        EmbeddingKind::HashedBow => Ok(Arc::new(HashedBowEmbedder::new(e.dim, e.seed))),
        EmbeddingKind::External => {
            let endpoint = e.endpoint.as_deref().unwrap_or_default();
            check_reachable("embedding", endpoint)?;
            let client = HttpEmbedder::connect(endpoint, e.timeout_ms, e.max_retries)
                .map_err(|err| ServiceError::Startup(format!("embedding provider probe failed: {err}")))?;
            Ok(Arc::new(client))
        }
    }
}

fn build_captioner(cfg: &AppConfig) -> Result<Arc<dyn CaptionProvider>, ServiceError> {
    let c = &cfg.caption;
    Ok(match c.kind {
        CaptionProviderKind::DeterministicStub => Arc::new(StubCaptioner::new(c.seed)),
        CaptionProviderKind::Scripted => {
            let path = c.script_path.as_deref().unwrap_or(Path::new(""));
            Arc::new(ScriptedCaptioner::from_path(path)?)
        }
        CaptionProviderKind::ExternalService => {
            let endpoint = c.endpoint.as_deref().unwrap_or_default();
            check_reachable("caption", endpoint)?;
            Arc::new(
                HttpCaptioner::new(endpoint, c.timeout_ms, c.max_retries)
                    .map_err(|e| ServiceError::Startup(e.to_string()))?,
            )
        }
    })
}

pub(crate) fn build_chat(cfg: &AppConfig) -> Result<Option<Arc<dyn ChatProvider>>, ServiceError> {
    let Some(c) = &cfg.chat else {
        return Ok(None);
    };
    check_reachable("chat", &c.endpoint)?;
    let client = HttpChat::new(&c.endpoint, c.timeout_ms, c.max_retries)
        .map_err(|e| ServiceError::Startup(e.to_string()))?;
    Ok(Some(Arc::new(client)))
}

/// What an ingest source turned out to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    CaptionFixture,
    FrameManifest,
    FrameDirectory,
}

/// Sniffs the first record: captions carry `text`, manifests carry `path`.
/// Empty files count as (empty) manifests.
pub fn detect_source(path: &Path) -> Result<SourceKind, ServiceError> {
    if path.is_dir() {
        return Ok(SourceKind::FrameDirectory);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::BadRequest(format!("cannot read {}: {e}", path.display())))?;
    let Some(first) = text.lines().find(|l| !l.trim().is_empty()) else {
        return Ok(SourceKind::FrameManifest);
    };
    let v: serde_json::Value = serde_json::from_str(first).map_err(|e| {
        ServiceError::BadRequest(format!("{}: first line is not JSON: {e}", path.display()))
    })?;
    if v.get("text").is_some() {
        Ok(SourceKind::CaptionFixture)
    } else if v.get("path").is_some() {
        Ok(SourceKind::FrameManifest)
    } else {
        Err(ServiceError::BadRequest(format!(
            "{}: neither a caption fixture nor a frame manifest",
            path.display()
        )))
    }
}

struct IngestGuard<'a>(&'a AtomicBool);

impl Drop for IngestGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

pub struct Runtime {
    config: AppConfig,
    store_path: PathBuf,
    agent: Agent,
    captioner: Arc<dyn CaptionProvider>,
    ingesting: AtomicBool,
    // Serializes ingest + persist; queries only take the store's read lock.
    writer: Mutex<()>,
}

impl Runtime {
    /// Validates the config, connects providers and loads (or creates) the store.
    pub fn open(config: AppConfig, offline: bool) -> Result<Self, ServiceError> {
        config.validate(offline)?;
        let embedder = build_embedder(&config)?;
        let captioner = build_captioner(&config)?;
        let chat = build_chat(&config)?;
        let store_path = config.store_path.clone();
        let store = if store_path.exists() {
            load(&store_path)?
        } else {
            MemoryStore::new(embedder.dim())
        };
        if store.dim() != embedder.dim() {
            return Err(ServiceError::Startup(format!(
                "store {} has dim {} but the embedding provider produces dim {}",
                store_path.display(),
                store.dim(),
                embedder.dim()
            )));
        }
        let agent_cfg = AgentConfig {
            template: PromptTemplate(config.retrieval.prompt_template.clone()),
            context_budget_tokens: config.retrieval.context_budget_tokens,
            chat: config
                .chat
                .as_ref()
                .map(|c| ChatOptions {
                    max_tokens: c.max_tokens,
                    temperature: c.temperature,
                })
                .unwrap_or_default(),
        };
        let agent = Agent::new(store.into_shared(), embedder, chat, agent_cfg);
        Ok(Self {
            config,
            store_path,
            agent,
            captioner,
            ingesting: AtomicBool::new(false),
            writer: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn store(&self) -> &SharedStore {
        self.agent.store()
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn ask(&self, req: &AskRequest) -> Result<AskResponse, ServiceError> {
        let mut query = MemoryQuery::new(req.question.clone())?
            .with_k(req.k.unwrap_or(self.config.retrieval.k))?;
        if let Some(v) = &req.video_id {
            query = query.with_filter(MetadataFilter::video(v.clone()));
        }
        Ok(self.agent.answer(&query)?.into())
    }

    pub fn stats(&self) -> MemoryStats {
        let store = self.store().read();
        MemoryStats {
            chunk_count: store.len(),
            video_ids: store.video_ids(),
            total_caption_tokens: store.total_caption_tokens(),
            store_file_bytes: std::fs::metadata(&self.store_path).map(|m| m.len()).unwrap_or(0),
            ingest_in_progress: self.ingesting.load(Ordering::SeqCst),
        }
    }

    fn reject_known_videos<'v>(&self, videos: impl IntoIterator<Item = &'v str>) -> Result<(), ServiceError> {
        let present = self.store().read().video_ids();
        let incoming: BTreeSet<&str> = videos.into_iter().collect();
        let dup: Vec<&str> = incoming
            .into_iter()
            .filter(|v| present.iter().any(|p| p == v))
            .collect();
        if dup.is_empty() {
            Ok(())
        } else {
            Err(ServiceError::Conflict(format!("video(s) already in memory: {}", dup.join(", "))))
        }
    }

    fn begin_ingest(&self) -> IngestGuard<'_> {
        self.ingesting.store(true, Ordering::SeqCst);
        IngestGuard(&self.ingesting)
    }

    /// Chunks, embeds, stores and persists a complete caption history.
    pub fn ingest_captions(&self, records: &[CaptionRecord]) -> Result<IngestSummary, ServiceError> {
        let _w = self.writer.lock();
        self.reject_known_videos(records.iter().map(|r| r.video_id.as_str()))?;
        let _flag = self.begin_ingest();
        let summary = ingest_captions(
            self.store(),
            self.agent.embedder().as_ref(),
            records,
            self.config.chunker,
        )?;
        self.persist()?;
        Ok(summary)
    }

    /// Ingests a caption fixture, frame manifest or frame directory.
    pub fn ingest_path(&self, source: &Path) -> Result<IngestSummary, ServiceError> {
        match detect_source(source)? {
            SourceKind::CaptionFixture => self.ingest_captions(&read_caption_fixture(source)?),
            SourceKind::FrameManifest | SourceKind::FrameDirectory => {
                let frames = sample_frames(source, self.config.capture.sample_rate_hz)?;
                let _w = self.writer.lock();
                self.reject_known_videos(frames.iter().map(|f| f.video_id.as_str()))?;
                let _flag = self.begin_ingest();
                let summary = ingest_frames(
                    self.store(),
                    self.captioner.as_ref(),
                    self.agent.embedder().as_ref(),
                    &frames,
                    &self.config.caption.descriptor_prompt,
                    self.config.capture.workers,
                    self.config.chunker,
                )?;
                self.persist()?;
                Ok(summary)
            }
        }
    }

    pub fn persist(&self) -> Result<(), ServiceError> {
        persist(&self.store().read(), &self.store_path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offline(dir: &Path) -> Runtime {
        let cfg = AppConfig {
            store_path: dir.join("m.store"),
            ..AppConfig::default()
        };
        Runtime::open(cfg, true).unwrap()
    }

    fn caption(video: &str, i: u64, text: &str) -> CaptionRecord {
        CaptionRecord {
            video_id: video.into(),
            frame_index: i,
            timestamp_s: i as f64 / 4.0,
            text: text.into(),
            encoder_id: "test".into(),
        }
    }

    #[test]
    fn ingest_persists_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let rt = offline(dir.path());
        let s = rt
            .ingest_captions(&[caption("a", 0, "I put the red mug on the table.")])
            .unwrap();
        assert_eq!(s.chunks, 1);
        let stats = rt.stats();
        assert_eq!(stats.chunk_count, 1);
        assert!(stats.store_file_bytes > 0);
        assert!(!stats.ingest_in_progress);
        drop(rt);
        assert_eq!(offline(dir.path()).stats().chunk_count, 1);
    }

    #[test]
    fn same_video_twice_conflicts() {
        let dir = tempfile::tempdir().unwrap();
        let rt = offline(dir.path());
        rt.ingest_captions(&[caption("a", 0, "first")]).unwrap();
        assert!(matches!(
            rt.ingest_captions(&[caption("a", 1, "second")]),
            Err(ServiceError::Conflict(_))
        ));
        rt.ingest_captions(&[caption("b", 0, "other video")]).unwrap();
    }

    #[test]
    fn empty_manifest_gives_zero_summary() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("empty.jsonl");
        std::fs::write(&m, "").unwrap();
        let rt = offline(dir.path());
        let s = rt.ingest_path(&m).unwrap();
        assert_eq!((s.frames, s.captions, s.chunks), (0, 0, 0));
        assert!(s.failures.is_empty());
    }

    #[test]
    fn manifest_ingest_uses_stub_captioner() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("frames.jsonl");
        let lines: Vec<String> = (0..8)
            .map(|i| {
                format!(
                    r#"{{"video_id":"walk","frame_index":{i},"timestamp_s":{},"path":"f{i}.jpg"}}"#,
                    i as f64 * 0.25
                )
            })
            .collect();
        std::fs::write(&m, lines.join("\n")).unwrap();
        let rt = offline(dir.path());
        let s = rt.ingest_path(&m).unwrap();
        assert_eq!((s.frames, s.captions, s.chunks), (8, 8, 1));
    }

    #[test]
    fn unreachable_provider_is_startup_error() {
        let dir = tempfile::tempdir().unwrap();
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let mut cfg = AppConfig {
            store_path: dir.path().join("m.store"),
            ..AppConfig::default()
        };
        cfg.embedding.kind = EmbeddingKind::External;
        cfg.embedding.endpoint = Some(format!("http://127.0.0.1:{port}/embed"));
        assert!(matches!(Runtime::open(cfg.clone(), false), Err(ServiceError::Startup(_))));
        assert!(matches!(Runtime::open(cfg, true), Err(ServiceError::Config(_))));
    }

    #[test]
    fn ask_respects_k_and_video_filter() {
        let dir = tempfile::tempdir().unwrap();
        let rt = offline(dir.path());
        rt.ingest_captions(&[caption("a", 0, "I put the red mug on the table.")]).unwrap();
        rt.ingest_captions(&[caption("b", 0, "The red mug is in the sink.")]).unwrap();
        let req = AskRequest { question: "Where is the red mug?".into(), k: Some(1), video_id: None };
        assert_eq!(rt.ask(&req).unwrap().sources.len(), 1);
        let req = AskRequest { video_id: Some("b".into()), k: None, ..req };
        let r = rt.ask(&req).unwrap();
        assert!(r.sources.iter().all(|s| s.video_id == "b"));
        assert_eq!(r.answer, "The red mug is in the sink.");
        let empty = AskRequest { question: "".into(), ..AskRequest::default() };
        assert!(matches!(rt.ask(&empty), Err(ServiceError::BadRequest(_))));
    }
}
