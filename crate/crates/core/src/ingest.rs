//! Caption history → chunks → embeddings → store.

use serde::Serialize;

use crate::capture::{
    run_encoding_pipeline, CaptionProvider, CaptionRecord, EncodeFailure, Frame, PipelineStatus,
};
use crate::error::Result;
use crate::memory::{
    embed_many, Chunk, ChunkIds, ChunkerConfig, EmbeddingProvider, SharedStore, StoredItem,
    StreamingChunker, DEFAULT_EMBEDDING_BATCH,
};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct IngestSummary {
    pub frames: usize,
    pub captions: usize,
    pub chunks: usize,
    pub failures: Vec<EncodeFailure>,
    pub status: PipelineStatus,
}

impl Default for IngestSummary {
    fn default() -> Self {
        Self {
            frames: 0,
            captions: 0,
            chunks: 0,
            failures: Vec::new(),
            status: PipelineStatus::Complete,
        }
    }
}

/// Streams captions into a store. Each finalized chunk is embedded once and
/// upserted; embedding happens outside the store's write lock.
pub struct Ingestor<'a> {
    store: SharedStore,
    embedder: &'a dyn EmbeddingProvider,
    chunker_cfg: ChunkerConfig,
    batch_size: usize,
    chunkers: Vec<StreamingChunker>,
    // Provisional ids; the store assigns the real ones.
    scratch_ids: ChunkIds,
    summary: IngestSummary,
}

impl<'a> Ingestor<'a> {
    pub fn new(
        store: SharedStore,
        embedder: &'a dyn EmbeddingProvider,
        chunker_cfg: ChunkerConfig,
    ) -> Result<Self> {
        chunker_cfg.validate()?;
        Ok(Self {
            store,
            embedder,
            chunker_cfg,
            batch_size: DEFAULT_EMBEDDING_BATCH,
            chunkers: Vec::new(),
            scratch_ids: ChunkIds::default(),
            summary: IngestSummary::default(),
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn chunker_for(&mut self, video_id: &str) -> Result<&mut StreamingChunker> {
        let pos = match self.chunkers.iter().position(|c| c.video_id() == video_id) {
            Some(p) => p,
            None => {
                self.chunkers
                    .push(StreamingChunker::new(video_id, self.chunker_cfg)?);
                self.chunkers.len() - 1
            }
        };
        Ok(&mut self.chunkers[pos])
    }

    /// Adds captions (in frame order per video); returns chunks stored.
    pub fn push_captions(&mut self, records: &[CaptionRecord]) -> Result<usize> {
        let mut ready = Vec::new();
        for rec in records {
            let mut ids = self.scratch_ids;
            ready.extend(self.chunker_for(&rec.video_id)?.push(rec, &mut ids));
            self.scratch_ids = ids;
        }
        self.summary.captions += records.len();
        self.store_chunks(ready)
    }

    /// Finalizes every partial window.
    pub fn flush(&mut self) -> Result<usize> {
        let mut ready = Vec::new();
        for c in &mut self.chunkers {
            ready.extend(c.flush(&mut self.scratch_ids));
        }
        self.store_chunks(ready)
    }

    fn store_chunks(&mut self, chunks: Vec<Chunk>) -> Result<usize> {
        if chunks.is_empty() {
            return Ok(0);
        }
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let vectors = embed_many(&texts, self.embedder, self.batch_size)?;
        let mut store = self.store.write();
        for (mut chunk, vector) in chunks.into_iter().zip(vectors) {
            chunk.chunk_id = store.next_chunk_id();
            store.upsert(StoredItem { chunk, vector })?;
            self.summary.chunks += 1;
        }
        Ok(self.summary.chunks)
    }

    pub fn record_encoding(&mut self, frames: usize, failures: Vec<EncodeFailure>, status: PipelineStatus) {
        self.summary.frames += frames;
        self.summary.failures.extend(failures);
        if status == PipelineStatus::Degraded {
            self.summary.status = PipelineStatus::Degraded;
        }
    }

    pub fn summary(&self) -> &IngestSummary {
        &self.summary
    }

    pub fn finish(mut self) -> Result<IngestSummary> {
        self.flush()?;
        Ok(self.summary)
    }
}

/// Chunks, embeds and stores a complete caption history.
pub fn ingest_captions(
    store: &SharedStore,
    embedder: &dyn EmbeddingProvider,
    records: &[CaptionRecord],
    chunker_cfg: ChunkerConfig,
) -> Result<IngestSummary> {
    let mut ing = Ingestor::new(store.clone(), embedder, chunker_cfg)?;
    ing.push_captions(records)?;
    ing.finish()
}

/// Encodes frames with `captioner`, then ingests the captions.
pub fn ingest_frames(
    store: &SharedStore,
    captioner: &dyn CaptionProvider,
    embedder: &dyn EmbeddingProvider,
    frames: &[Frame],
    prompt: &str,
    workers: usize,
    chunker_cfg: ChunkerConfig,
) -> Result<IngestSummary> {
    let encoded = run_encoding_pipeline(frames, captioner, prompt, workers)?;
    let mut ing = Ingestor::new(store.clone(), embedder, chunker_cfg)?;
    ing.record_encoding(frames.len(), encoded.failures, encoded.status);
    ing.push_captions(&encoded.records)?;
    ing.finish()
}
