//! Shared fixtures for the benchmarks.

use pgsum_core::corpus::{encode_subset, tokenize, EncodedExample, Vocabulary};
use pgsum_core::model::ModelDims;
use pgsum_core::synthetic::news_like;

/// A seeded news-like corpus with its vocabulary and encodings.
pub fn corpus(n: usize) -> (Vocabulary, Vec<EncodedExample>) {
    let raw = news_like(n, 17);
    let vocab = Vocabulary::build(
        raw.iter().map(|r| tokenize(&r.article).into_iter().chain(tokenize(&r.summary))),
        2000,
    )
    .expect("vocabulary");
    let ids: Vec<usize> = (0..n).collect();
    let ex = encode_subset(&raw, &ids, &vocab, 400, 100).expect("encoding");
    (vocab, ex)
}

pub fn dims(vocab: &Vocabulary, hidden: usize) -> ModelDims {
    ModelDims {
        vocab_size: vocab.len(),
        emb_dim: hidden / 2,
        hidden_dim: hidden,
    }
}
