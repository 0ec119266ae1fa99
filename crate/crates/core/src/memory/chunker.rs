use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{tokenize, Chunk, ChunkMetadata};
use crate::capture::CaptionRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkerConfig {
    pub chunk_size_tokens: usize,
    pub overlap_tokens: usize,
    /// Windows whose text has fewer characters are dropped.
    pub min_chars: usize,
}

impl Default for ChunkerConfig {
    fn default() -> Self {
        Self {
            chunk_size_tokens: 1024,
            overlap_tokens: 256,
            min_chars: 5,
        }
    }
}

impl ChunkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.overlap_tokens >= self.chunk_size_tokens {
            return Err(Error::argument(format!(
                "overlap ({}) must be smaller than chunk size ({})",
                self.overlap_tokens, self.chunk_size_tokens
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size_tokens - self.overlap_tokens
    }
}

/// Monotone chunk id sequence shared by several chunkers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChunkIds(pub u64);

impl ChunkIds {
    fn take(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

/// Byte range of one token in the arena, in absolute arena offsets.
#[derive(Debug, Clone)]
struct Token {
    start: usize,
    end: usize,
    frame_index: u64,
    timestamp_s: f64,
}

/// Incremental chunker over one video's cumulative token stream.
///
/// Windows start every `stride` tokens. A window is emitted once all of its
/// tokens have arrived, or on [`flush`](Self::flush). Emitted chunks are final.
#[derive(Debug, Clone)]
pub struct StreamingChunker {
    cfg: ChunkerConfig,
    video_id: String,
    /// Retained tokens joined by single spaces, so any window's text is
    /// one contiguous slice.
    arena: String,
    /// Absolute offset of `arena[0]`.
    arena_base: usize,
    /// Tokens from stream offset `base` onward.
    tokens: VecDeque<Token>,
    base: u64,
    total: u64,
    next_start: u64,
    /// End offset of the last emitted (or discarded) window.
    covered: u64,
    window_index: u64,
}

impl StreamingChunker {
    pub fn new(video_id: impl Into<String>, cfg: ChunkerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            video_id: video_id.into(),
            arena: String::new(),
            arena_base: 0,
            tokens: VecDeque::new(),
            base: 0,
            total: 0,
            next_start: 0,
            covered: 0,
            window_index: 0,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    /// Tokens pushed so far.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn push(&mut self, record: &CaptionRecord, ids: &mut ChunkIds) -> Vec<Chunk> {
        debug_assert_eq!(record.video_id, self.video_id);
        for t in tokenize(&record.text) {
            if !self.arena.is_empty() {
                self.arena.push(' ');
            }
            let start = self.arena_base + self.arena.len();
            self.arena.push_str(t);
            self.tokens.push_back(Token {
                start,
                end: start + t.len(),
                frame_index: record.frame_index,
                timestamp_s: record.timestamp_s,
            });
        }
        self.total = self.base + self.tokens.len() as u64;

        let size = self.cfg.chunk_size_tokens as u64;
        let mut out = Vec::new();
        while self.next_start + size <= self.total {
            let start = self.next_start;
            out.extend(self.emit(start, start + size, ids));
            self.next_start += self.cfg.stride() as u64;
            self.trim();
        }
        out
    }

    /// Emits the trailing partial window, if any tokens are not yet covered.
    pub fn flush(&mut self, ids: &mut ChunkIds) -> Vec<Chunk> {
        if self.total <= self.covered {
            return Vec::new();
        }
        let start = self.next_start;
        let end = self.total;
        let out = self.emit(start, end, ids);
        self.next_start = end
            .saturating_sub(self.cfg.overlap_tokens as u64)
            .max(start);
        self.trim();
        out.into_iter().collect()
    }

    fn emit(&mut self, start: u64, end: u64, ids: &mut ChunkIds) -> Option<Chunk> {
        let index = self.window_index;
        self.window_index += 1;
        self.covered = end;

        let lo = (start - self.base) as usize;
        let hi = (end - self.base) as usize;
        let first = &self.tokens[lo];
        let last = &self.tokens[hi - 1];
        let text = &self.arena[first.start - self.arena_base..last.end - self.arena_base];
        if text.chars().count() < self.cfg.min_chars {
            return None;
        }
        Some(Chunk {
            chunk_id: ids.take(),
            token_count: hi - lo,
            text: text.to_string(),
            metadata: ChunkMetadata {
                video_id: self.video_id.clone(),
                t_start_s: first.timestamp_s,
                t_end_s: last.timestamp_s,
                chunk_index: index,
                frame_span: [first.frame_index, last.frame_index],
                token_span: [start, end],
            },
        })
    }

    fn trim(&mut self) {
        while self.base < self.next_start && !self.tokens.is_empty() {
            self.tokens.pop_front();
            self.base += 1;
        }
        // Compact once the dead prefix outweighs the live part.
        match self.tokens.front() {
            None => {
                self.arena_base += self.arena.len();
                self.arena.clear();
            }
            Some(t) => {
                let dead = t.start - self.arena_base;
                if dead > self.arena.len() / 2 {
                    self.arena.drain(..dead);
                    self.arena_base += dead;
                }
            }
        }
    }
}

/// Chunks a complete caption history, one token stream per video.
///
/// Videos are processed in order of first appearance; ids start at 0.
pub fn chunk_stream(captions: &[CaptionRecord], cfg: &ChunkerConfig) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    let mut chunkers: Vec<StreamingChunker> = Vec::new();
    let mut per_video: Vec<Vec<&CaptionRecord>> = Vec::new();
    for rec in captions {
        match chunkers.iter().position(|c| c.video_id() == rec.video_id) {
            Some(i) => per_video[i].push(rec),
            None => {
                chunkers.push(StreamingChunker::new(rec.video_id.clone(), *cfg)?);
                per_video.push(vec![rec]);
            }
        }
    }

    let mut ids = ChunkIds::default();
    let mut out = Vec::new();
    for (chunker, records) in chunkers.iter_mut().zip(per_video) {
        for rec in records {
            out.extend(chunker.push(rec, &mut ids));
        }
        out.extend(chunker.flush(&mut ids));
    }
    Ok(out)
}
