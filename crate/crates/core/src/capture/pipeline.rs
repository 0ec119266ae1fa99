use serde::Serialize;

use super::{CaptionProvider, CaptionRecord, Frame};
use crate::error::{Error, ProviderError, Result};

/// Fraction of frames that must encode for a run to count as complete.
pub const MIN_SUCCESS_RATIO: f64 = 0.95;

/// A frame the provider could not encode. The pipeline skips it.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("frame {video_id}:{frame_index} failed to encode: {error}")]
pub struct EncodeFailure {
    pub video_id: String,
    pub frame_index: u64,
    #[serde(serialize_with = "display")]
    pub error: ProviderError,
}

fn display<S: serde::Serializer>(e: &ProviderError, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Complete,
    /// Fewer than [`MIN_SUCCESS_RATIO`] of the frames were encoded.
    Degraded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingOutput {
    pub records: Vec<CaptionRecord>,
    pub failures: Vec<EncodeFailure>,
    pub status: PipelineStatus,
}

pub fn encode_frame(
    frame: &Frame,
    provider: &dyn CaptionProvider,
    prompt: &str,
) -> Result<CaptionRecord, EncodeFailure> {
    let fail = |error| EncodeFailure {
        video_id: frame.video_id.clone(),
        frame_index: frame.frame_index,
        error,
    };
    let text = provider.describe(frame, prompt).map_err(fail)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(fail(ProviderError::EmptyResponse));
    }
    Ok(CaptionRecord {
        video_id: frame.video_id.clone(),
        frame_index: frame.frame_index,
        timestamp_s: frame.timestamp_s,
        text: text.to_string(),
        encoder_id: provider.id().to_string(),
    })
}

/// Encodes `frames` with at most `workers` concurrent provider calls.
///
/// Output order follows input order, whatever order workers finish in.
/// Failed frames are logged and listed in [`EncodingOutput::failures`].
pub fn run_encoding_pipeline(
    frames: &[Frame],
    provider: &dyn CaptionProvider,
    prompt: &str,
    workers: usize,
) -> Result<EncodingOutput> {
    if workers == 0 {
        return Err(Error::argument("worker_count must be at least 1"));
    }
    let results = encode_all(frames, provider, prompt, workers)?;

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => {
                tracing::warn!(video_id = %f.video_id, frame_index = f.frame_index, error = %f.error, "skipping frame");
                failures.push(f);
            }
        }
    }
    let status = if frames.is_empty()
        || records.len() as f64 / frames.len() as f64 >= MIN_SUCCESS_RATIO
    {
        PipelineStatus::Complete
    } else {
        PipelineStatus::Degraded
    };
    Ok(EncodingOutput {
        records,
        failures,
        status,
    })
}

#[cfg(feature = "parallel")]
fn encode_all(
    frames: &[Frame],
    provider: &dyn CaptionProvider,
    prompt: &str,
    workers: usize,
) -> Result<Vec<Result<CaptionRecord, EncodeFailure>>> {
    use rayon::prelude::*;

    if workers == 1 {
        return Ok(encode_sequential(frames, provider, prompt));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("encode-{i}"))
        .build()
        .map_err(|e| Error::argument(format!("cannot start encoding workers: {e}")))?;
    Ok(pool.install(|| {
        frames
            .par_iter()
            .map(|f| encode_frame(f, provider, prompt))
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn encode_all(
    frames: &[Frame],
    provider: &dyn CaptionProvider,
    prompt: &str,
    _workers: usize,
) -> Result<Vec<Result<CaptionRecord, EncodeFailure>>> {
    Ok(encode_sequential(frames, provider, prompt))
}

fn encode_sequential(
    frames: &[Frame],
    provider: &dyn CaptionProvider,
    prompt: &str,
) -> Vec<Result<CaptionRecord, EncodeFailure>> {
    frames.iter().map(|f| encode_frame(f, provider, prompt)).collect()
}
