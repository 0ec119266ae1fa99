use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::{CaptionRecord, Frame, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, ProviderError, Result};
use crate::hashing::fnv1a_with_seed;

/// The frame encoder: maps one frame plus a descriptor prompt to text.
///
/// Implementations are shared across encoding workers.
pub trait CaptionProvider: Send + Sync {
    fn id(&self) -> &str;
    fn describe(&self, frame: &Frame, prompt: &str) -> Result<String, ProviderError>;
}

const ACTORS: &[&str] = &["A person", "The camera wearer", "Someone", "A man", "A woman"];
const ACTIONS: &[&str] = &[
    "holds", "picks up", "looks at", "moves", "puts down", "walks past", "reaches for", "opens",
];
const COLORS: &[&str] = &["blue", "green", "white", "black", "yellow", "grey", "brown", "orange"];
const OBJECTS: &[&str] = &[
    "bowl", "towel", "notebook", "bottle", "plate", "chair", "laptop", "basket", "spoon", "box",
];
const PLACES: &[&str] = &[
    "near the counter", "by the window", "on the shelf", "next to the sink", "in the hallway",
    "beside the door", "on the floor", "under the lamp",
];

/// Deterministic template captions derived from `(video_id, frame_index, seed)`.
#[derive(Debug, Clone)]
pub struct StubCaptioner {
    seed: u64,
}

impl StubCaptioner {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn caption_for(&self, video_id: &str, frame_index: u64) -> String {
        let key = fnv1a_with_seed(self.seed, video_id.as_bytes())
            ^ frame_index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let pick = |rng: &mut ChaCha8Rng, xs: &[&'static str]| *xs.choose(rng).unwrap();
        format!(
            "{} {} a {} {} {}.",
            pick(&mut rng, ACTORS),
            pick(&mut rng, ACTIONS),
            pick(&mut rng, COLORS),
            pick(&mut rng, OBJECTS),
            pick(&mut rng, PLACES),
        )
    }
}

impl CaptionProvider for StubCaptioner {
    fn id(&self) -> &str {
        "stub"
    }

    fn describe(&self, frame: &Frame, _prompt: &str) -> Result<String, ProviderError> {
        Ok(self.caption_for(&frame.video_id, frame.frame_index))
    }
}

#[derive(Debug, Deserialize)]
struct FixtureLine {
    video_id: String,
    frame_index: u64,
    timestamp_s: Option<f64>,
    text: String,
    encoder_id: Option<String>,
}

/// Reads a caption fixture (JSON lines of `{video_id, frame_index,
/// timestamp_s?, text, encoder_id?}`). Missing timestamps assume 4 Hz sampling.
pub fn read_caption_fixture(path: &Path) -> Result<Vec<CaptionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::Source {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at_line = |detail: String| Error::FormatAtLine {
            path: path.to_path_buf(),
            line: n + 1,
            detail,
        };
        let parsed: FixtureLine = serde_json::from_str(&line).map_err(|e| at_line(e.to_string()))?;
        if parsed.text.trim().is_empty() {
            return Err(at_line("caption text is empty".into()));
        }
        out.push(CaptionRecord {
            timestamp_s: parsed
                .timestamp_s
                .unwrap_or(parsed.frame_index as f64 / DEFAULT_SAMPLE_RATE_HZ),
            video_id: parsed.video_id,
            frame_index: parsed.frame_index,
            text: parsed.text,
            encoder_id: parsed.encoder_id.unwrap_or_else(|| "scripted".to_string()),
        });
    }
    Ok(out)
}

/// Replays captions from a fixture, keyed by `(video_id, frame_index)`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedCaptioner {
    script: HashMap<(String, u64), String>,
}

impl ScriptedCaptioner {
    pub fn from_records(records: impl IntoIterator<Item = CaptionRecord>) -> Self {
        Self {
            script: records
                .into_iter()
                .map(|r| ((r.video_id, r.frame_index), r.text))
                .collect(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(Self::from_records(read_caption_fixture(path)?))
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl CaptionProvider for ScriptedCaptioner {
    fn id(&self) -> &str {
        "scripted"
    }

    fn describe(&self, frame: &Frame, _prompt: &str) -> Result<String, ProviderError> {
        self.script
            .get(&(frame.video_id.clone(), frame.frame_index))
            .cloned()
            .ok_or_else(|| ProviderError::NotScripted {
                video_id: frame.video_id.clone(),
                frame_index: frame.frame_index,
            })
    }
}
