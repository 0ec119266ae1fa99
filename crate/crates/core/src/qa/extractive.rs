//! Deterministic offline answerer: picks the sentence of the best chunk that
//! shares the most content words with the question.

use std::collections::HashSet;

pub const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "am", "do", "does", "did", "i",
    "you", "he", "she", "it", "we", "they", "me", "my", "your", "of", "in", "on", "at", "to",
    "for", "with", "from", "by", "and", "or", "but", "what", "where", "when", "who", "which",
    "how", "this", "that", "these", "those", "there", "here", "have", "has", "had",
];

/// Lowercased alphanumeric content words, stopwords removed.
pub fn content_words(text: &str) -> HashSet<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Splits after each `.`, `!` or `?`; pieces are trimmed, empty ones dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            out.push(text[start..end].trim());
            start = end;
        }
    }
    out.push(text[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}

/// Sentence with maximal question overlap; ties go to the earliest.
pub fn best_sentence<'a>(question: &str, passage: &'a str) -> Option<&'a str> {
    let q = content_words(question);
    let mut best: Option<(&str, usize)> = None;
    for s in split_sentences(passage) {
        let overlap = content_words(s).intersection(&q).count();
        if best.is_none_or(|(_, b)| overlap > b) {
            best = Some((s, overlap));
        }
    }
    best.map(|(s, _)| s)
}
