use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::{Chunk, ChunkMetadata, EmbeddingVector};
use crate::error::{Error, Result};

/// Multi-reader / single-writer handle. Queries under the read lock see a
/// consistent snapshot.
pub type SharedStore = Arc<RwLock<MemoryStore>>;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredItem {
    pub chunk: Chunk,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub chunk_id: u64,
    /// Cosine similarity in `[-1, 1]`.
    pub score: f64,
    pub chunk: Chunk,
}

/// Conjunctive metadata predicate. `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetadataFilter {
    pub video_id: Option<String>,
    /// Keeps chunks whose time span intersects `[from, to]`.
    pub time_range: Option<(f64, f64)>,
}

impl MetadataFilter {
    pub fn video(video_id: impl Into<String>) -> Self {
        Self {
            video_id: Some(video_id.into()),
            time_range: None,
        }
    }

    pub fn matches(&self, meta: &ChunkMetadata) -> bool {
        if let Some(v) = &self.video_id {
            if *v != meta.video_id {
                return false;
            }
        }
        if let Some((from, to)) = self.time_range {
            if meta.t_end_s < from || meta.t_start_s > to {
                return false;
            }
        }
        true
    }
}

/// How a query scans the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Splits the scan across the rayon pool; same as `Sequential` when the
    /// `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Exact cosine index over unit vectors held in one contiguous buffer.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    dim: usize,
    chunks: Vec<Chunk>,
    vectors: Vec<f32>,
    positions: HashMap<u64, usize>,
    next_id: u64,
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f64,
    id: u64,
    pos: usize,
}

// "Greater" means worse, so a max-heap keeps the weakest kept hit on top.
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

fn push_bounded(heap: &mut BinaryHeap<Ranked>, k: usize, r: Ranked) {
    if heap.len() < k {
        heap.push(r);
    } else if let Some(worst) = heap.peek() {
        if r < *worst {
            heap.pop();
            heap.push(r);
        }
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += f64::from(x[i]) * f64::from(y[i]);
        }
    }
    let mut sum: f64 = acc.iter().sum();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        sum += f64::from(*x) * f64::from(*y);
    }
    sum
}

/// Rows scanned per parallel task.
#[cfg(feature = "parallel")]
const SCAN_BLOCK: usize = 4096;

impl MemoryStore {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "store dimension must be positive");
        Self {
            dim,
            chunks: Vec::new(),
            vectors: Vec::new(),
            positions: HashMap::new(),
            next_id: 0,
        }
    }

    pub fn into_shared(self) -> SharedStore {
        Arc::new(RwLock::new(self))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Smallest id not yet used by any stored chunk.
    pub fn next_chunk_id(&self) -> u64 {
        self.next_id
    }

    pub fn get(&self, chunk_id: u64) -> Option<StoredItem> {
        self.positions.get(&chunk_id).map(|&pos| StoredItem {
            chunk: self.chunks[pos].clone(),
            vector: EmbeddingVector::from_unit(self.row(pos).to_vec())
                .expect("stored vectors are unit length"),
        })
    }

    /// Stored items in insertion order.
    pub fn items(&self) -> impl Iterator<Item = (&Chunk, &[f32])> + '_ {
        self.chunks.iter().enumerate().map(|(i, c)| (c, self.row(i)))
    }

    pub fn video_ids(&self) -> Vec<String> {
        self.chunks
            .iter()
            .map(|c| c.metadata.video_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Caption tokens covered by stored chunks, summed over videos.
    pub fn total_caption_tokens(&self) -> u64 {
        let mut ends: HashMap<&str, u64> = HashMap::new();
        for c in &self.chunks {
            let e = ends.entry(&c.metadata.video_id).or_default();
            *e = (*e).max(c.metadata.token_span[1]);
        }
        ends.values().sum()
    }

    fn row(&self, pos: usize) -> &[f32] {
        &self.vectors[pos * self.dim..(pos + 1) * self.dim]
    }

    /// Inserts or replaces the chunk with `item.chunk.chunk_id`.
    pub fn upsert(&mut self, item: StoredItem) -> Result<u64> {
        if item.vector.dim() != self.dim {
            return Err(Error::argument(format!(
                "vector dimension {} does not match store dimension {}",
                item.vector.dim(),
                self.dim
            )));
        }
        let id = item.chunk.chunk_id;
        match self.positions.get(&id) {
            Some(&pos) => {
                self.vectors[pos * self.dim..(pos + 1) * self.dim]
                    .copy_from_slice(item.vector.as_slice());
                self.chunks[pos] = item.chunk;
            }
            None => {
                self.positions.insert(id, self.chunks.len());
                self.vectors.extend_from_slice(item.vector.as_slice());
                self.chunks.push(item.chunk);
            }
        }
        self.next_id = self.next_id.max(id + 1);
        Ok(id)
    }

    /// Top-`k` chunks by cosine similarity, ties broken by ascending id.
    pub fn query(
        &self,
        vector: &EmbeddingVector,
        k: usize,
        filter: Option<&MetadataFilter>,
    ) -> Result<Vec<Hit>> {
        self.query_with(vector, k, filter, Execution::default())
    }

    pub fn query_with(
        &self,
        vector: &EmbeddingVector,
        k: usize,
        filter: Option<&MetadataFilter>,
        exec: Execution,
    ) -> Result<Vec<Hit>> {
        if vector.dim() != self.dim {
            return Err(Error::argument(format!(
                "query dimension {} does not match store dimension {}",
                vector.dim(),
                self.dim
            )));
        }
        if k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        let q = vector.as_slice();
        let heap = match exec {
            Execution::Sequential => self.scan(q, k, filter, 0..self.len()),
            Execution::Parallel => self.scan_parallel(q, k, filter),
        };
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|r| Hit {
                chunk_id: r.id,
                score: r.score,
                chunk: self.chunks[r.pos].clone(),
            })
            .collect())
    }

    fn scan(
        &self,
        q: &[f32],
        k: usize,
        filter: Option<&MetadataFilter>,
        rows: std::ops::Range<usize>,
    ) -> BinaryHeap<Ranked> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        for pos in rows {
            let chunk = &self.chunks[pos];
            if let Some(f) = filter {
                if !f.matches(&chunk.metadata) {
                    continue;
                }
            }
            let score = dot(q, self.row(pos)).clamp(-1.0, 1.0);
            push_bounded(
                &mut heap,
                k,
                Ranked {
                    score,
                    id: chunk.chunk_id,
                    pos,
                },
            );
        }
        heap
    }

    #[cfg(feature = "parallel")]
    fn scan_parallel(
        &self,
        q: &[f32],
        k: usize,
        filter: Option<&MetadataFilter>,
    ) -> BinaryHeap<Ranked> {
        use rayon::prelude::*;

        let n = self.len();
        if n <= SCAN_BLOCK {
            return self.scan(q, k, filter, 0..n);
        }
        let blocks = n.div_ceil(SCAN_BLOCK);
        (0..blocks)
            .into_par_iter()
            .map(|b| self.scan(q, k, filter, b * SCAN_BLOCK..((b + 1) * SCAN_BLOCK).min(n)))
            .reduce(BinaryHeap::new, |mut acc, part| {
                for r in part {
                    push_bounded(&mut acc, k, r);
                }
                acc
            })
    }

    #[cfg(not(feature = "parallel"))]
    fn scan_parallel(
        &self,
        q: &[f32],
        k: usize,
        filter: Option<&MetadataFilter>,
    ) -> BinaryHeap<Ranked> {
        self.scan(q, k, filter, 0..self.len())
    }
}
