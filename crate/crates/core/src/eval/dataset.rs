use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNSPECIFIED_SPLIT: &str = "unspecified";

/// One question about one video, with its reference answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QASample {
    pub sample_id: String,
    pub video_id: String,
    pub question: String,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

impl QASample {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.sample_id.trim().is_empty() {
            return Err("sample_id is empty".into());
        }
        if self.question.trim().is_empty() {
            return Err("question is empty".into());
        }
        if self.gold_answer.trim().is_empty() {
            return Err("answer is empty".into());
        }
        if let Some([s, e]) = self.segment {
            if s.is_nan() || e.is_nan() || s > e {
                return Err(format!("segment start {s} is after end {e}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitSummary {
    pub videos: usize,
    pub qa_pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<QASample>,
}

impl Dataset {
    /// Distinct videos and QA pairs per split label.
    pub fn split_summary(&self) -> BTreeMap<String, SplitSummary> {
        let mut videos: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut pairs: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &self.samples {
            let split = s.split.as_deref().unwrap_or(UNSPECIFIED_SPLIT);
            videos.entry(split).or_default().insert(&s.video_id);
            *pairs.entry(split).or_default() += 1;
        }
        pairs
            .into_iter()
            .map(|(split, qa_pairs)| {
                (
                    split.to_string(),
                    SplitSummary {
                        videos: videos[split].len(),
                        qa_pairs,
                    },
                )
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Loads and validates a JSON-lines QA file. Blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::Source {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |detail: String| Error::FormatAtLine {
            path: path.to_path_buf(),
            line: n + 1,
            detail,
        };
        let sample: QASample = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        sample.validate().map_err(at)?;
        if !ids.insert(sample.sample_id.clone()) {
            return Err(at(format!("duplicate sample_id {:?}", sample.sample_id)));
        }
        samples.push(sample);
    }
    let ds = Dataset { samples };
    for (split, s) in ds.split_summary() {
        tracing::info!(split, videos = s.videos, qa_pairs = s.qa_pairs, "loaded split");
    }
    Ok(ds)
}
