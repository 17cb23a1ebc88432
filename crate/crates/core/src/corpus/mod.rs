//! Tokenization, vocabulary, copy-aware example encoding, ingestion,
//! dataset splitting and batching.

mod example;
mod ingest;
mod split;
mod tokenize;
mod vocab;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use example::{batches, encode_example, to_fixed_id, Batch, EncodedExample};
pub use ingest::{ingest, ingest_reader, read_canonical, write_jsonl, Format, RawExample};
pub use split::{split_dataset, SplitManifest};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, PAD, RESERVED, START, STOP, UNK};

use crate::fsio;

/// Article truncation applied when none is configured.
pub const DEFAULT_MAX_ARTICLE_LEN: usize = 400;
/// Summary truncation applied when none is configured.
pub const DEFAULT_MAX_SUMMARY_LEN: usize = 100;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line}: {detail}")]
    Malformed { path: String, line: u64, detail: String },
    #[error("{path}: row {row}: missing field `{field}`")]
    MissingField { path: String, row: usize, field: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("article is empty after truncation")]
    EmptyArticle,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Output of the preprocessing step: canonical examples, the vocabulary
/// built from the training split, and the split manifest.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub examples: Vec<RawExample>,
    pub vocab: Vocabulary,
    pub manifest: SplitManifest,
}

pub fn preprocess(examples: Vec<RawExample>, vocab_size: usize, ratios: [f64; 3], seed: u64) -> Result<Preprocessed, CorpusError> {
    let manifest = split_dataset(examples.len(), ratios, seed)?;
    let streams = manifest.train.iter().flat_map(|&i| {
        let e = &examples[i];
        [tokenize(&e.article), tokenize(&e.summary)]
    });
    let vocab = Vocabulary::build(streams, vocab_size)?;
    Ok(Preprocessed {
        examples,
        vocab,
        manifest,
    })
}

impl Preprocessed {
    /// Writes `corpus.jsonl`, `vocab.txt` and `manifest.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| CorpusError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut corpus = Vec::new();
        write_jsonl(&self.examples, &mut corpus).map_err(io_err(dir))?;
        let mut vocab = Vec::new();
        self.vocab.write_to(&mut vocab).map_err(io_err(dir))?;
        let mut manifest = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        manifest.push(b'\n');

        let mut written = Vec::new();
        for (name, bytes) in [(CORPUS_FILE, corpus), (VOCAB_FILE, vocab), (MANIFEST_FILE, manifest)] {
            let path = dir.join(name);
            fsio::write_atomic(&path, &bytes).map_err(io_err(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Vocabulary::read_from(std::io::BufReader::new(file))
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CorpusError::Malformed {
        path: path.display().to_string(),
        line: e.line() as u64,
        detail: e.to_string(),
    })
}

/// Tokenizes and encodes `examples[ids]` against `vocab`.
pub fn encode_subset(
    examples: &[RawExample],
    ids: &[usize],
    vocab: &Vocabulary,
    max_article_len: usize,
    max_summary_len: usize,
) -> Result<Vec<EncodedExample>, CorpusError> {
    ids.iter()
        .map(|&i| {
            let e = examples.get(i).ok_or_else(|| {
                CorpusError::InvalidArgument(format!("example id {i} outside corpus of {}", examples.len()))
            })?;
            encode_example(
                &tokenize(&e.article),
                &tokenize(&e.summary),
                vocab,
                max_article_len,
                max_summary_len,
            )
        })
        .collect()
}
