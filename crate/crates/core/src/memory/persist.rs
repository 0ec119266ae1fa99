//! Single-file store format.
//!
//! ```text
//! #epmem-store {"version":1,"dim":256,"count":2}
//! {"chunk_id":0,"text":"...","token_count":1024,"metadata":{...},"vector":[...]}
//! {"chunk_id":1,...}
//! ```
//!
//! Files are written to a temporary sibling and renamed into place.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Chunk, EmbeddingVector, MemoryStore, StoredItem};
use crate::error::{Error, Result};

pub const MAGIC: &str = "#epmem-store";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    dim: usize,
    count: usize,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    #[serde(flatten)]
    chunk: &'a Chunk,
    vector: &'a [f32],
}

#[derive(Deserialize)]
struct RecordIn {
    #[serde(flatten)]
    chunk: Chunk,
    vector: Vec<f32>,
}

pub fn persist(store: &MemoryStore, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        let header = Header {
            version: FORMAT_VERSION,
            dim: store.dim(),
            count: store.len(),
        };
        writeln!(w, "{MAGIC} {}", serde_json::to_string(&header).map_err(std::io::Error::from)?)?;
        for (chunk, vector) in store.items() {
            serde_json::to_writer(&mut w, &RecordOut { chunk, vector }).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Loads a store, validating every record before returning anything.
pub fn load(path: &Path) -> Result<MemoryStore> {
    let raw = fs::read_to_string(path).map_err(|e| Error::Source {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bad = |detail: String| Error::format(path, detail);

    let mut lines = raw.split_inclusive('\n');
    let first = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let header_json = first
        .strip_suffix('\n')
        .and_then(|l| l.strip_prefix(MAGIC))
        .and_then(|l| l.strip_prefix(' '))
        .ok_or_else(|| bad("missing store header".into()))?;
    let header: Header =
        serde_json::from_str(header_json).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(bad(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    if header.dim == 0 {
        return Err(bad("dimension must be positive".into()));
    }

    let mut store = MemoryStore::new(header.dim);
    let mut seen = HashSet::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        // Every record is newline-terminated; anything else is a torn write.
        let body = line
            .strip_suffix('\n')
            .ok_or_else(|| bad(format!("line {lineno}: truncated record")))?;
        let rec: RecordIn =
            serde_json::from_str(body).map_err(|e| bad(format!("line {lineno}: {e}")))?;
        if !seen.insert(rec.chunk.chunk_id) {
            return Err(bad(format!("line {lineno}: duplicate chunk_id {}", rec.chunk.chunk_id)));
        }
        if rec.vector.len() != header.dim {
            return Err(bad(format!(
                "line {lineno}: vector has {} dims, header says {}",
                rec.vector.len(),
                header.dim
            )));
        }
        let vector = EmbeddingVector::from_unit(rec.vector)
            .map_err(|e| bad(format!("line {lineno}: {e}")))?;
        store
            .upsert(StoredItem {
                chunk: rec.chunk,
                vector,
            })
            .map_err(|e| bad(format!("line {lineno}: {e}")))?;
    }
    if store.len() != header.count {
        return Err(bad(format!(
            "header promises {} records, found {}",
            header.count,
            store.len()
        )));
    }
    Ok(store)
}
