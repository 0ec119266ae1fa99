use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ProviderError, Result};
use crate::hashing::fnv1a_with_seed;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;
/// Maximum texts per provider request.
pub const DEFAULT_EMBEDDING_BATCH: usize = 64;
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Unit-length embedding with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument("embedding must have at least one dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("embedding has non-finite components"));
        }
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::argument("cannot normalize a zero vector"));
        }
        Ok(Self(values.into_iter().map(|v| (f64::from(v) / norm) as f32).collect()))
    }

    /// Accepts an already-normalized vector as is.
    pub fn from_unit(values: Vec<f32>) -> Result<Self> {
        let v = Self(values);
        if v.0.is_empty() || v.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::argument("embedding is empty or has non-finite components"));
        }
        // f32 rounding of a normalized vector lands within a few ulps of 1.
        if (v.norm() - 1.0).abs() > 1e-5 {
            return Err(Error::argument(format!("vector norm {} is not 1", v.norm())));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = String;

    fn try_from(v: Vec<f32>) -> std::result::Result<Self, String> {
        Self::from_unit(v).map_err(|e| e.to_string())
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// The text-to-vector transform. Callable from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Embeds every text. Callers guarantee texts are non-blank.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector> {
    if text.trim().is_empty() {
        return Err(Error::argument("cannot embed empty text"));
    }
    let mut out = provider.embed_batch(&[text])?;
    match out.len() {
        1 => Ok(out.pop().unwrap()),
        n => Err(ProviderError::Malformed(format!("expected 1 vector, got {n}")).into()),
    }
}

/// Embeds `texts` in batches of at most `batch_size`, preserving order.
/// Batches run concurrently when the `parallel` feature is on.
pub fn embed_many(
    texts: &[&str],
    provider: &dyn EmbeddingProvider,
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(Error::argument("cannot embed empty text"));
    }
    let batch_size = batch_size.max(1);
    let run = |batch: &[&str]| -> Result<Vec<EmbeddingVector>> {
        let vectors = provider.embed_batch(batch)?;
        if vectors.len() != batch.len() {
            return Err(ProviderError::Malformed(format!(
                "expected {} vectors, got {}",
                batch.len(),
                vectors.len()
            ))
            .into());
        }
        Ok(vectors)
    };

    #[cfg(feature = "parallel")]
    let batches: Vec<Result<Vec<EmbeddingVector>>> = {
        use rayon::prelude::*;
        texts.par_chunks(batch_size).map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let batches: Vec<Result<Vec<EmbeddingVector>>> = texts.chunks(batch_size).map(run).collect();

    let mut out = Vec::with_capacity(texts.len());
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

/// Offline embedder: feature-hashed bag of words with log-scaled term
/// frequency, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedBowEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM, 0)
    }
}

impl HashedBowEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    /// Lowercased alphanumeric feature for a raw token. Pure punctuation
    /// tokens hash as themselves.
    pub fn feature(token: &str) -> String {
        let lower = token.to_lowercase();
        let stripped: String = lower.chars().filter(|c| c.is_alphanumeric()).collect();
        if stripped.is_empty() {
            lower
        } else {
            stripped
        }
    }

    pub fn bucket(&self, feature: &str) -> usize {
        (fnv1a_with_seed(self.seed, feature.as_bytes()) % self.dim as u64) as usize
    }

    pub fn embed_text(&self, text: &str) -> Option<EmbeddingVector> {
        let mut counts: HashMap<String, u32> = HashMap::new();
        for tok in text.split_whitespace() {
            *counts.entry(Self::feature(tok)).or_default() += 1;
        }
        if counts.is_empty() {
            return None;
        }
        let mut values = vec![0f32; self.dim];
        for (feature, tf) in counts {
            values[self.bucket(&feature)] += 1.0 + (tf as f32).ln();
        }
        EmbeddingVector::normalized(values).ok()
    }
}

impl EmbeddingProvider for HashedBowEmbedder {
    fn id(&self) -> &str {
        "hashed-bow"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts
            .iter()
            .map(|t| {
                self.embed_text(t)
                    .ok_or_else(|| ProviderError::Malformed("text has no tokens".into()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| f64::from(*x) * f64::from(*y))
            .sum()
    }

    #[test]
    fn deterministic() {
        let e = HashedBowEmbedder::default();
        let a = embed("A person places a red mug on the table.", &e).unwrap();
        let b = embed("A person places a red mug on the table.", &e).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 256);
        assert!((a.norm() - 1.0).abs() < UNIT_NORM_TOLERANCE);
    }

    #[test]
    fn disjoint_vocabularies_are_orthogonal() {
        let e = HashedBowEmbedder::default();
        let left = "kettle toaster spatula";
        let right = "bicycle helmet garage";
        let buckets = |t: &str| -> Vec<usize> {
            t.split_whitespace().map(|w| e.bucket(&HashedBowEmbedder::feature(w))).collect()
        };
        let (lb, rb) = (buckets(left), buckets(right));
        assert!(lb.iter().all(|b| !rb.contains(b)), "fixture texts collide: {lb:?} {rb:?}");
        let sim = cosine(&embed(left, &e).unwrap(), &embed(right, &e).unwrap());
        assert_eq!(sim, 0.0);
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let e = HashedBowEmbedder::default();
        assert_eq!(
            embed("Red MUG!", &e).unwrap(),
            embed("red mug", &e).unwrap()
        );
        // pure punctuation still embeds
        assert!(embed("?!", &e).is_ok());
    }

    #[test]
    fn empty_text_is_argument_error() {
        let e = HashedBowEmbedder::default();
        assert!(matches!(embed("", &e), Err(Error::Argument(_))));
        assert!(matches!(embed("  \n", &e), Err(Error::Argument(_))));
        assert!(matches!(embed_many(&["ok", ""], &e, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn embed_many_matches_single_calls() {
        let e = HashedBowEmbedder::new(64, 9);
        let texts: Vec<String> = (0..150).map(|i| format!("caption {i} with word{}", i % 7)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let batched = embed_many(&refs, &e, 64).unwrap();
        let single: Vec<_> = refs.iter().map(|t| embed(t, &e).unwrap()).collect();
        assert_eq!(batched, single);
    }

    #[test]
    fn normalization_rejects_bad_input() {
        assert!(EmbeddingVector::normalized(vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::normalized(vec![f32::NAN, 1.0]).is_err());
        assert!(EmbeddingVector::from_unit(vec![0.5, 0.5]).is_err());
        assert!(EmbeddingVector::from_unit(vec![0.6, 0.8]).is_ok());
        let v: std::result::Result<EmbeddingVector, _> = serde_json::from_str("[3.0, 4.0]");
        assert!(v.is_err());
    }

    proptest! {
        #[test]
        fn normalized_vectors_are_unit(values in prop::collection::vec(-1e3f32..1e3, 1..300)) {
            prop_assume!(values.iter().any(|v| *v != 0.0));
            let v = EmbeddingVector::normalized(values).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < UNIT_NORM_TOLERANCE);
        }
    }
}
