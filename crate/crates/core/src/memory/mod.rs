//! Chunked, embedded caption memory with exact cosine top-k retrieval.

mod chunker;
mod embed;
mod persist;
mod store;

pub use chunker::{chunk_stream, ChunkIds, ChunkerConfig, StreamingChunker};
pub use embed::{
    embed, embed_many, EmbeddingProvider, EmbeddingVector, HashedBowEmbedder,
    DEFAULT_EMBEDDING_BATCH, DEFAULT_EMBEDDING_DIM, UNIT_NORM_TOLERANCE,
};
pub use persist::{load, persist, FORMAT_VERSION, MAGIC};
pub use store::{Execution, Hit, MemoryStore, MetadataFilter, SharedStore, StoredItem};

use serde::{Deserialize, Serialize};

/// Splits on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkMetadata {
    pub video_id: String,
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Window ordinal within the video's token stream (discarded windows included).
    pub chunk_index: u64,
    /// First and last contributing frame.
    pub frame_span: [u64; 2],
    /// Half-open token offsets `[start, end)` within the video's token stream.
    pub token_span: [u64; 2],
}

/// A window of caption history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: u64,
    pub text: String,
    pub token_count: usize,
    pub metadata: ChunkMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_whitespace() {
        assert_eq!(tokenize("a red mug"), vec!["a", "red", "mug"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  tab\tnew\nline\u{3000}ideographic "), vec!["tab", "new", "line", "ideographic"]);
    }

    #[test]
    fn tokenize_word_count_oracle() {
        let words: Vec<String> = (0..2560).map(|i| format!("w{}", i % 97)).collect();
        let text = words.join("  \n");
        assert_eq!(tokenize(&text).len(), 2560);
        assert_eq!(tokenize(&text).join(" "), words.join(" "));
    }
}
