//! Sentence-similarity metrics reported as percentages.
//!
//! All three share one normalization: lowercase, punctuation removed,
//! whitespace split.

use std::collections::HashMap;
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};

use crate::error::{Error, Result};

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;
pub const BLEU_MAX_ORDER: usize = 4;

pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Sufficient statistics for corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; BLEU_MAX_ORDER],
    pub totals: [u64; BLEU_MAX_ORDER],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    pub fn from_pair(candidate: &str, reference: &str) -> Self {
        let c = normalize_tokens(candidate);
        let r = normalize_tokens(reference);
        let mut stats = BleuStats {
            candidate_len: c.len() as u64,
            reference_len: r.len() as u64,
            ..Default::default()
        };
        for n in 1..=BLEU_MAX_ORDER {
            if c.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
            for g in r.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut cand_counts: HashMap<&[String], u64> = HashMap::new();
            for g in c.windows(n) {
                *cand_counts.entry(g).or_default() += 1;
            }
            stats.totals[n - 1] = (c.len() + 1 - n) as u64;
            stats.matches[n - 1] = cand_counts
                .iter()
                .map(|(g, &k)| k.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..BLEU_MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// BLEU-4 with brevity penalty and exponential smoothing of zero match
    /// counts, in `[0, 100]`.
    pub fn score(&self) -> f64 {
        if self.matches.iter().all(|&m| m == 0) {
            return 0.0;
        }
        let bp = if self.candidate_len < self.reference_len {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        } else {
            1.0
        };
        let mut log_sum = 0.0;
        let mut smooth = 1.0;
        for n in 0..BLEU_MAX_ORDER {
            if self.totals[n] == 0 {
                // No n-grams of this order at all: BLEU-4 is zero.
                return 0.0;
            }
            let p = if self.matches[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * self.totals[n] as f64)
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += p.ln();
        }
        (100.0 * bp * (log_sum / BLEU_MAX_ORDER as f64).exp()).clamp(0.0, 100.0)
    }
}

/// Corpus-level BLEU-4 over aligned candidate/reference pairs.
pub fn bleu4<C: AsRef<str>, R: AsRef<str>>(candidates: &[C], references: &[R]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::argument("BLEU needs at least one candidate"));
    }
    if candidates.len() != references.len() {
        return Err(Error::argument(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut total = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        total.add(&BleuStats::from_pair(c.as_ref(), r.as_ref()));
    }
    Ok(total.score())
}

/// BLEU-4 of a single pair (a one-sentence corpus).
pub fn sentence_bleu4(candidate: &str, reference: &str) -> f64 {
    BleuStats::from_pair(candidate, reference).score()
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Unigram alignment `(candidate_index, reference_index)` sorted by
/// candidate index: exact matches first, then stem matches among the rest.
///
/// Each stage repeatedly aligns the longest run of consecutive matching
/// words (earliest run on ties), which keeps chunk counts low.
pub fn meteor_alignment(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut c_used = vec![false; candidate.len()];
    let mut r_used = vec![false; reference.len()];
    let mut pairs = Vec::new();

    let exact: Vec<&str> = candidate.iter().map(String::as_str).collect();
    let exact_r: Vec<&str> = reference.iter().map(String::as_str).collect();
    tile(&exact, &exact_r, &mut c_used, &mut r_used, &mut pairs);

    let stems: Vec<String> = candidate.iter().map(|w| stemmer().stem(w).into_owned()).collect();
    let stems_r: Vec<String> = reference.iter().map(|w| stemmer().stem(w).into_owned()).collect();
    let stems: Vec<&str> = stems.iter().map(String::as_str).collect();
    let stems_r: Vec<&str> = stems_r.iter().map(String::as_str).collect();
    tile(&stems, &stems_r, &mut c_used, &mut r_used, &mut pairs);

    pairs.sort_unstable();
    pairs
}

fn tile(
    c: &[&str],
    r: &[&str],
    c_used: &mut [bool],
    r_used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    loop {
        let mut best = (0usize, 0usize, 0usize); // (len, ci, ri)
        for ci in 0..c.len() {
            if c_used[ci] {
                continue;
            }
            for ri in 0..r.len() {
                let mut len = 0;
                while ci + len < c.len()
                    && ri + len < r.len()
                    && !c_used[ci + len]
                    && !r_used[ri + len]
                    && c[ci + len] == r[ri + len]
                {
                    len += 1;
                }
                if len > best.0 {
                    best = (len, ci, ri);
                }
            }
        }
        let (len, ci, ri) = best;
        if len == 0 {
            return;
        }
        for k in 0..len {
            c_used[ci + k] = true;
            r_used[ri + k] = true;
            pairs.push((ci + k, ri + k));
        }
    }
}

/// Number of maximal runs contiguous in both sentences.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// METEOR with exact and stem matching (no synonyms), in `[0, 100]`.
pub fn meteor(candidate: &str, reference: &str) -> f64 {
    let c = normalize_tokens(candidate);
    let r = normalize_tokens(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let pairs = meteor_alignment(&c, &r);
    let matches = pairs.len() as f64;
    if matches == 0.0 {
        return 0.0;
    }
    let precision = matches / c.len() as f64;
    let recall = matches / r.len() as f64;
    let fmean = precision * recall / (METEOR_ALPHA * precision + (1.0 - METEOR_ALPHA) * recall);
    let penalty = METEOR_GAMMA * (count_chunks(&pairs) as f64 / matches).powf(METEOR_BETA);
    (100.0 * fmean * (1.0 - penalty)).clamp(0.0, 100.0)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (balanced), in `[0, 100]`.
pub fn rouge_l_f(candidate: &str, reference: &str) -> f64 {
    let c = normalize_tokens(candidate);
    let r = normalize_tokens(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&c, &r) as f64;
    let p = lcs / c.len() as f64;
    let rc = lcs / r.len() as f64;
    if p + rc == 0.0 {
        return 0.0;
    }
    100.0 * 2.0 * p * rc / (p + rc)
}
