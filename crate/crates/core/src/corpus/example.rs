use super::vocab::{Vocabulary, PAD, START, STOP, UNK};
use super::CorpusError;

/// One article/summary pair in id space.
///
/// Article words missing from the vocabulary are numbered in order of first
/// occurrence: the `k`-th distinct one gets extended id `V + k`, which lets
/// the copy mechanism point at it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedExample {
    pub article_ids: Vec<usize>,
    pub article_extended_ids: Vec<usize>,
    pub oov_words: Vec<String>,
    /// `START` followed by the summary ids in the fixed vocabulary.
    pub summary_input_ids: Vec<usize>,
    /// Summary ids in the extended space followed by `STOP`.
    pub summary_target_extended_ids: Vec<usize>,
}

impl EncodedExample {
    pub fn article_len(&self) -> usize {
        self.article_ids.len()
    }

    pub fn summary_len(&self) -> usize {
        self.summary_input_ids.len()
    }
}

pub fn encode_example<S: AsRef<str>>(
    article_tokens: &[S],
    summary_tokens: &[S],
    vocab: &Vocabulary,
    max_article_len: usize,
    max_summary_len: usize,
) -> Result<EncodedExample, CorpusError> {
    if max_article_len == 0 || max_summary_len == 0 {
        return Err(CorpusError::InvalidArgument("length limits must be positive".into()));
    }
    let article = &article_tokens[..article_tokens.len().min(max_article_len)];
    if article.is_empty() {
        return Err(CorpusError::EmptyArticle);
    }
    let v = vocab.len();
    let mut oov_words: Vec<String> = Vec::new();
    let mut article_ids = Vec::with_capacity(article.len());
    let mut article_extended_ids = Vec::with_capacity(article.len());
    for tok in article {
        let tok = tok.as_ref();
        let id = vocab.id(tok);
        article_ids.push(id);
        if id == UNK && !vocab.contains(tok) {
            let k = match oov_words.iter().position(|w| w == tok) {
                Some(k) => k,
                None => {
                    oov_words.push(tok.to_string());
                    oov_words.len() - 1
                }
            };
            article_extended_ids.push(v + k);
        } else {
            article_extended_ids.push(id);
        }
    }

    let summary = &summary_tokens[..summary_tokens.len().min(max_summary_len)];
    let mut summary_input_ids = Vec::with_capacity(summary.len() + 1);
    let mut summary_target_extended_ids = Vec::with_capacity(summary.len() + 1);
    summary_input_ids.push(START);
    for tok in summary {
        let tok = tok.as_ref();
        let id = vocab.id(tok);
        summary_input_ids.push(id);
        let ext = if id == UNK {
            oov_words.iter().position(|w| w == tok).map_or(UNK, |k| v + k)
        } else {
            id
        };
        summary_target_extended_ids.push(ext);
    }
    summary_target_extended_ids.push(STOP);

    Ok(EncodedExample {
        article_ids,
        article_extended_ids,
        oov_words,
        summary_input_ids,
        summary_target_extended_ids,
    })
}

/// Maps extended ids back into the fixed vocabulary.
pub fn to_fixed_id(id: usize, vocab_size: usize) -> usize {
    if id >= vocab_size {
        UNK
    } else {
        id
    }
}

/// Examples padded to a common length with 1/0 masks over real/pad positions.
#[derive(Clone, Debug)]
pub struct Batch {
    pub article_ids: Vec<Vec<usize>>,
    pub article_extended_ids: Vec<Vec<usize>>,
    pub article_mask: Vec<Vec<u8>>,
    pub summary_input_ids: Vec<Vec<usize>>,
    pub summary_target_ids: Vec<Vec<usize>>,
    pub summary_mask: Vec<Vec<u8>>,
    pub oov_words: Vec<Vec<String>>,
}

impl Batch {
    pub fn from_examples(examples: &[EncodedExample]) -> Self {
        let max_article = examples.iter().map(|e| e.article_len()).max().unwrap_or(0);
        let max_summary = examples.iter().map(|e| e.summary_len()).max().unwrap_or(0);
        let pad = |ids: &[usize], to: usize| {
            let mut v = ids.to_vec();
            v.resize(to, PAD);
            v
        };
        let mask = |len: usize, to: usize| (0..to).map(|i| u8::from(i < len)).collect::<Vec<_>>();
        Self {
            article_ids: examples.iter().map(|e| pad(&e.article_ids, max_article)).collect(),
            article_extended_ids: examples
                .iter()
                .map(|e| pad(&e.article_extended_ids, max_article))
                .collect(),
            article_mask: examples.iter().map(|e| mask(e.article_len(), max_article)).collect(),
            summary_input_ids: examples
                .iter()
                .map(|e| pad(&e.summary_input_ids, max_summary))
                .collect(),
            summary_target_ids: examples
                .iter()
                .map(|e| pad(&e.summary_target_extended_ids, max_summary))
                .collect(),
            summary_mask: examples.iter().map(|e| mask(e.summary_len(), max_summary)).collect(),
            oov_words: examples.iter().map(|e| e.oov_words.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.article_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.article_ids.is_empty()
    }
}

/// Consecutive batches of at most `batch_size` examples.
pub fn batches(examples: &[EncodedExample], batch_size: usize) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    examples.chunks(batch_size).map(Batch::from_examples).collect()
}
