//! Frame sampling and per-frame language encoding.
//!
//! A video enters the system as a directory of pre-extracted images or as a
//! JSON-lines frame manifest. Frames are sampled at a fixed rate (4 Hz by
//! default) and each one is turned into a [`CaptionRecord`] by a pluggable
//! [`CaptionProvider`].

mod pipeline;
mod provider;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pipeline::{
    encode_frame, run_encoding_pipeline, EncodeFailure, EncodingOutput, PipelineStatus,
    MIN_SUCCESS_RATIO,
};
pub use provider::{
    read_caption_fixture, CaptionProvider, ScriptedCaptioner, StubCaptioner,
};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 4.0;
pub const DEFAULT_DESCRIPTOR_PROMPT: &str = "Describe this image in detail.";
/// Native frame rate assumed for an image directory without a `video.json` sidecar.
pub const DEFAULT_DIRECTORY_FPS: f64 = 30.0;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "webp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FramePayload {
    Path(PathBuf),
    Bytes(Vec<u8>),
    /// Synthetic frame with no pixels; only usable with stub providers.
    Empty,
}

impl FramePayload {
    pub fn read_bytes(&self) -> std::io::Result<Vec<u8>> {
        match self {
            FramePayload::Path(p) => fs::read(p),
            FramePayload::Bytes(b) => Ok(b.clone()),
            FramePayload::Empty => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub video_id: String,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub payload: FramePayload,
}

impl Frame {
    pub fn new(video_id: impl Into<String>, frame_index: u64, rate_hz: f64, payload: FramePayload) -> Self {
        Self {
            video_id: video_id.into(),
            frame_index,
            timestamp_s: frame_index as f64 / rate_hz,
            payload,
        }
    }
}

/// One frame's language encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub video_id: String,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub text: String,
    pub encoder_id: String,
}

impl CaptionRecord {
    /// Ordering key: `(video_id, frame_index)`.
    pub fn key(&self) -> (&str, u64) {
        (&self.video_id, self.frame_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionProviderKind {
    ExternalService,
    DeterministicStub,
    /// Deterministic stub replaying captions from a fixture file.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionProviderConfig {
    pub kind: CaptionProviderKind,
    pub endpoint: Option<String>,
    pub descriptor_prompt: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub seed: u64,
    pub script_path: Option<PathBuf>,
}

impl Default for CaptionProviderConfig {
    fn default() -> Self {
        Self {
            kind: CaptionProviderKind::DeterministicStub,
            endpoint: None,
            descriptor_prompt: DEFAULT_DESCRIPTOR_PROMPT.to_string(),
            timeout_ms: 30_000,
            max_retries: 3,
            seed: 0,
            script_path: None,
        }
    }
}

impl CaptionProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::argument("caption provider timeout_ms must be > 0"));
        }
        match self.kind {
            CaptionProviderKind::ExternalService if self.endpoint.is_none() => Err(
                Error::argument("external caption provider requires an endpoint"),
            ),
            CaptionProviderKind::Scripted if self.script_path.is_none() => Err(
                Error::argument("scripted caption provider requires script_path"),
            ),
            _ => Ok(()),
        }
    }
}

/// One line of a frame manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub path: PathBuf,
}

/// False for NaN.
fn is_positive(x: f64) -> bool {
    x > 0.0
}

/// Timestamps of the frames sampled from `duration_s` seconds of video.
///
/// Produces `floor(duration_s * rate_hz)` samples at `i / rate_hz`.
pub fn sample_times(duration_s: f64, rate_hz: f64) -> Vec<f64> {
    if !is_positive(duration_s) || !is_positive(rate_hz) {
        return Vec::new();
    }
    let count = (duration_s * rate_hz).floor() as u64;
    (0..count).map(|i| i as f64 / rate_hz).collect()
}

/// Synthetic frames without pixels, for stub-driven runs.
pub fn synthetic_frames(video_id: &str, duration_s: f64, rate_hz: f64) -> Vec<Frame> {
    let count = sample_times(duration_s, rate_hz).len() as u64;
    (0..count)
        .map(|i| Frame::new(video_id, i, rate_hz, FramePayload::Empty))
        .collect()
}

#[derive(Debug, Deserialize)]
struct DirectorySidecar {
    video_id: Option<String>,
    fps: Option<f64>,
}

/// Samples frames from an image directory or a frame manifest.
///
/// Each sampled frame at time `t` takes the latest source image at or before
/// `t`. Frame indices are contiguous from 0 per video.
pub fn sample_frames(source: &Path, rate_hz: f64) -> Result<Vec<Frame>> {
    if !is_positive(rate_hz) || !rate_hz.is_finite() {
        return Err(Error::argument(format!("sample rate must be positive, got {rate_hz}")));
    }
    let meta = fs::metadata(source).map_err(|e| Error::Source {
        path: source.to_path_buf(),
        source: e,
    })?;
    if meta.is_dir() {
        sample_directory(source, rate_hz)
    } else {
        let entries = read_manifest(source)?;
        Ok(sample_manifest(&entries, rate_hz))
    }
}

fn sample_directory(dir: &Path, rate_hz: f64) -> Result<Vec<Frame>> {
    let source_err = |e| Error::Source {
        path: dir.to_path_buf(),
        source: e,
    };
    let sidecar_path = dir.join("video.json");
    let sidecar: Option<DirectorySidecar> = if sidecar_path.exists() {
        let raw = fs::read_to_string(&sidecar_path).map_err(source_err)?;
        Some(serde_json::from_str(&raw).map_err(|e| Error::format(&sidecar_path, e.to_string()))?)
    } else {
        None
    };
    let fps = sidecar.as_ref().and_then(|s| s.fps).unwrap_or(DEFAULT_DIRECTORY_FPS);
    if !is_positive(fps) {
        return Err(Error::format(&sidecar_path, "fps must be positive"));
    }
    let video_id = sidecar
        .and_then(|s| s.video_id)
        .or_else(|| dir.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "video".to_string());

    let mut images: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(source_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .map(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .collect();
    images.sort();
    if images.is_empty() {
        return Ok(Vec::new());
    }

    let duration = images.len() as f64 / fps;
    let frames = sample_times(duration, rate_hz)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let src = ((t * fps + 1e-9).floor() as usize).min(images.len() - 1);
            Frame::new(&video_id, i as u64, rate_hz, FramePayload::Path(images[src].clone()))
        })
        .collect();
    Ok(frames)
}

/// Resamples manifest entries per video (videos in order of first appearance).
///
/// A video's duration is its last timestamp plus the mean entry spacing; a
/// single-entry video lasts one sample period.
pub fn sample_manifest(entries: &[ManifestEntry], rate_hz: f64) -> Vec<Frame> {
    let mut videos: Vec<(&str, Vec<&ManifestEntry>)> = Vec::new();
    for e in entries {
        match videos.iter_mut().find(|(v, _)| *v == e.video_id) {
            Some((_, list)) => list.push(e),
            None => videos.push((&e.video_id, vec![e])),
        }
    }

    let mut out = Vec::new();
    for (video_id, mut list) in videos {
        list.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
        let first = list[0].timestamp_s;
        let last = list[list.len() - 1].timestamp_s;
        let spacing = if list.len() > 1 {
            (last - first) / (list.len() - 1) as f64
        } else {
            1.0 / rate_hz
        };
        let duration = last + spacing;
        let mut cursor = 0usize;
        for (i, t) in sample_times(duration, rate_hz).into_iter().enumerate() {
            while cursor + 1 < list.len() && list[cursor + 1].timestamp_s <= t + 1e-9 {
                cursor += 1;
            }
            out.push(Frame::new(
                video_id,
                i as u64,
                rate_hz,
                FramePayload::Path(list[cursor].path.clone()),
            ));
        }
    }
    out
}

/// Reads a JSON-lines frame manifest. Relative paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = fs::File::open(path).map_err(|e| Error::Source {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry =
            serde_json::from_str(&line).map_err(|e| Error::FormatAtLine {
                path: path.to_path_buf(),
                line: n + 1,
                detail: e.to_string(),
            })?;
        if entry.path.is_relative() {
            entry.path = base.join(&entry.path);
        }
        entries.push(entry);
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_seconds_at_four_hz() {
        let frames = synthetic_frames("a", 10.0, DEFAULT_SAMPLE_RATE_HZ);
        assert_eq!(frames.len(), 40);
        assert_eq!(frames[0].timestamp_s, 0.0);
        assert_eq!(frames[1].timestamp_s, 0.25);
        assert_eq!(frames[39].timestamp_s, 9.75);
        assert!(frames.iter().enumerate().all(|(i, f)| f.frame_index == i as u64));
    }

    #[test]
    fn one_second_at_one_hz() {
        assert_eq!(sample_times(1.0, 1.0), vec![0.0]);
    }

    #[test]
    fn zero_length_is_empty() {
        assert!(sample_times(0.0, 4.0).is_empty());
    }

    #[test]
    fn directory_source_uses_sidecar_fps() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..20 {
            fs::write(dir.path().join(format!("f{i:04}.png")), [i as u8]).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        fs::write(dir.path().join("video.json"), r#"{"video_id":"kitchen","fps":10}"#).unwrap();

        let frames = sample_frames(dir.path(), 4.0).unwrap();
        // 20 images at 10 fps = 2 s -> 8 samples
        assert_eq!(frames.len(), 8);
        assert!(frames.iter().all(|f| f.video_id == "kitchen"));
        let picked: Vec<_> = frames
            .iter()
            .map(|f| match &f.payload {
                FramePayload::Path(p) => p.file_name().unwrap().to_string_lossy().into_owned(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(picked[0], "f0000.png");
        assert_eq!(picked[1], "f0002.png");
        assert_eq!(picked[2], "f0005.png");
        assert_eq!(picked[7], "f0017.png");
    }

    #[test]
    fn empty_directory_yields_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        assert!(sample_frames(dir.path(), 4.0).unwrap().is_empty());
    }

    #[test]
    fn missing_source_is_error() {
        let err = sample_frames(Path::new("/nonexistent/frames"), 4.0).unwrap_err();
        assert!(matches!(err, Error::Source { .. }));
    }

    #[test]
    fn bad_rate_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(sample_frames(dir.path(), 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn manifest_round_trip_at_native_rate() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("frames.jsonl");
        let mut body = String::new();
        for i in 0..12u64 {
            let e = ManifestEntry {
                video_id: "v".into(),
                frame_index: i,
                timestamp_s: i as f64 * 0.25,
                path: PathBuf::from(format!("img{i}.jpg")),
            };
            body.push_str(&serde_json::to_string(&e).unwrap());
            body.push('\n');
        }
        fs::write(&manifest, body).unwrap();

        let frames = sample_frames(&manifest, 4.0).unwrap();
        assert_eq!(frames.len(), 12);
        assert_eq!(
            frames[5].payload,
            FramePayload::Path(dir.path().join("img5.jpg"))
        );
        // downsample to 1 Hz: 3 s of video
        let slow = sample_frames(&manifest, 1.0).unwrap();
        assert_eq!(slow.len(), 3);
        assert_eq!(slow[2].payload, FramePayload::Path(dir.path().join("img8.jpg")));
    }

    #[test]
    fn malformed_manifest_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("frames.jsonl");
        fs::write(
            &manifest,
            "{\"video_id\":\"v\",\"frame_index\":0,\"timestamp_s\":0,\"path\":\"a.png\"}\n{oops}\n",
        )
        .unwrap();
        match sample_frames(&manifest, 4.0) {
            Err(Error::FormatAtLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn provider_config_validation() {
        let mut cfg = CaptionProviderConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.timeout_ms = 0;
        assert!(cfg.validate().is_err());
        cfg.timeout_ms = 10;
        cfg.kind = CaptionProviderKind::ExternalService;
        assert!(cfg.validate().is_err());
        cfg.endpoint = Some("http://localhost:9/caption".into());
        assert!(cfg.validate().is_ok());
    }

    proptest! {
        #[test]
        fn sample_count_is_floor_of_duration_times_rate(
            duration in 0.0f64..600.0,
            rate in 0.1f64..60.0,
        ) {
            let times = sample_times(duration, rate);
            prop_assert_eq!(times.len() as f64, (duration * rate).floor());
            for (i, t) in times.iter().enumerate() {
                prop_assert_eq!(*t, i as f64 / rate);
            }
            prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
