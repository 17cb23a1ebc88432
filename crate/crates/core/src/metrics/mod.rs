//! ROUGE-2 and the fact-triple based Factual score, with pluggable fact
//! extraction and embedding, plus min/median/mean/max reporting.

mod facts;
mod report;
mod rouge;

use thiserror::Error;

pub use facts::{
    factual_score, normalize, similarity, ExecEmbedder, ExecExtractor, FactEmbedder, FactExtractor, FactTriple,
    HashedEmbedder, LexiconExtractor, DEFAULT_EMBEDDING_WIDTH, HASH_SLOTS,
};
pub use report::{aggregate, Aggregate, Aggregates, Comparison, ComparisonRow, ExampleScores, ScoreReport, METRICS, STATS};
pub use rouge::{rouge2, Prf};

use crate::corpus::tokenize;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("adapter `{program}` failed: {detail}")]
    Adapter { program: String, detail: String },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error("example ids differ ({context}): {ids:?}")]
    IdMismatch { context: String, ids: Vec<usize> },
}

/// Factual precision, recall and F1 of `candidate` against `reference`.
pub fn factual<X, E>(candidate: &str, reference: &str, extractor: &X, embedder: &E) -> Result<Prf, MetricsError>
where
    X: FactExtractor + ?Sized,
    E: FactEmbedder + ?Sized,
{
    let g = embedder.embed(&extractor.extract(candidate)?)?;
    let r = embedder.embed(&extractor.extract(reference)?)?;
    Ok(factual_score(&g, &r))
}

/// ROUGE-2 and Factual scores of one summary.
pub fn score_example<X, E>(
    id: usize,
    candidate: &str,
    reference: &str,
    extractor: &X,
    embedder: &E,
) -> Result<ExampleScores, MetricsError>
where
    X: FactExtractor + ?Sized,
    E: FactEmbedder + ?Sized,
{
    let rouge = rouge2(&tokenize(candidate), &tokenize(reference));
    let fact = factual(candidate, reference, extractor, embedder)?;
    Ok(ExampleScores::new(id, rouge, fact))
}
