use std::path::PathBuf;

use epmem_core::eval::{bleu4, sentence_bleu4};
use serde::Deserialize;

#[derive(Deserialize)]
struct Pair {
    candidate: String,
    reference: String,
    bleu: f64,
}

#[derive(Deserialize)]
struct Oracle {
    corpus_bleu: f64,
    pairs: Vec<Pair>,
}

fn oracle() -> Oracle {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bleu_pairs.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn corpus_bleu_matches_reference_implementation() {
    let o = oracle();
    assert_eq!(o.pairs.len(), 50);
    let cands: Vec<&str> = o.pairs.iter().map(|p| p.candidate.as_str()).collect();
    let refs: Vec<&str> = o.pairs.iter().map(|p| p.reference.as_str()).collect();
    let got = bleu4(&cands, &refs).unwrap();
    assert!((got - o.corpus_bleu).abs() < 1e-4, "{got} vs {}", o.corpus_bleu);
}

#[test]
fn single_pair_bleu_matches_reference_implementation() {
    for p in oracle().pairs {
        let got = sentence_bleu4(&p.candidate, &p.reference);
        assert!(
            (got - p.bleu).abs() < 1e-4,
            "{:?} vs {:?}: {got} vs {}",
            p.candidate,
            p.reference,
            p.bleu
        );
    }
}
