//! Summary generation over the extended vocabulary: greedy and beam search,
//! rendering of copied OOV words, and repetition accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::corpus::{to_fixed_id, EncodedExample, Vocabulary, PAD, START, STOP, UNK};
use crate::model::{self, Bound, EncoderOutput, LstmState, ModelError, ModelParams};

pub const DEFAULT_BEAM_SIZE: usize = 4;
pub const DEFAULT_MAX_LEN: usize = 120;
pub const DEFAULT_MIN_LEN: usize = 35;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot decode an empty article")]
    EmptyArticle,
    #[error("invalid decode options: {0}")]
    Options(String),
    #[error("extended id {id} outside vocabulary plus {n_oov} article OOVs")]
    IdOutOfRange { id: usize, n_oov: usize },
}

impl From<crate::autodiff::AutodiffError> for DecodeError {
    fn from(e: crate::autodiff::AutodiffError) -> Self {
        DecodeError::Model(e.into())
    }
}

/// Whether a token's probability came mostly from the vocabulary softmax or
/// from copied attention mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Generated,
    Copied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedSummary {
    /// Extended-space ids, ending in `STOP` when the search finished.
    pub ids: Vec<usize>,
    pub origins: Vec<Origin>,
    /// Attention over article positions at each step.
    pub attention: Vec<Vec<f64>>,
    pub log_prob: f64,
}

impl DecodedSummary {
    pub fn mean_log_prob(&self) -> f64 {
        if self.ids.is_empty() {
            0.0
        } else {
            self.log_prob / self.ids.len() as f64
        }
    }

    pub fn finished(&self) -> bool {
        self.ids.last() == Some(&STOP)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeOptions {
    pub beam_size: usize,
    pub max_len: usize,
    pub min_len: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            beam_size: DEFAULT_BEAM_SIZE,
            max_len: DEFAULT_MAX_LEN,
            min_len: DEFAULT_MIN_LEN,
        }
    }
}

impl DecodeOptions {
    fn check(&self) -> Result<(), DecodeError> {
        if self.beam_size == 0 {
            return Err(DecodeError::Options("beam size must be at least 1".into()));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(DecodeError::Options(format!(
                "need max_len >= min_len >= 1, got max_len {} min_len {}",
                self.max_len, self.min_len
            )));
        }
        Ok(())
    }
}

/// Per-step view of the output distribution, read back from the graph.
struct StepDist {
    p_final: Vec<f64>,
    p_vocab: Vec<f64>,
    attention: Vec<f64>,
    p_gen: f64,
}

impl StepDist {
    fn origin(&self, id: usize, source: &[usize]) -> Origin {
        let generated = self.p_gen * self.p_vocab.get(id).copied().unwrap_or(0.0);
        let attn: f64 = source
            .iter()
            .zip(&self.attention)
            .filter(|(&s, _)| s == id)
            .map(|(_, a)| a)
            .sum();
        if (1.0 - self.p_gen) * attn > generated {
            Origin::Copied
        } else {
            Origin::Generated
        }
    }

    /// Ids by descending probability, lowest id first among ties.
    fn ranked(&self, step: usize, min_len: usize, block_unk: bool) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.p_final.len())
            .filter(|&i| !(i == STOP && step < min_len) && !(block_unk && i == UNK))
            .collect();
        ids.sort_by(|&a, &b| self.p_final[b].total_cmp(&self.p_final[a]).then(a.cmp(&b)));
        ids
    }
}

struct Session<'a> {
    graph: Graph,
    bound: Bound,
    enc: EncoderOutput,
    example: &'a EncodedExample,
    use_coverage: bool,
}

impl<'a> Session<'a> {
    fn new(params: &ModelParams, example: &'a EncodedExample, use_coverage: bool) -> Result<Self, DecodeError> {
        if example.article_ids.is_empty() {
            return Err(DecodeError::EmptyArticle);
        }
        let mut graph = Graph::new();
        let bound = params.bind(&mut graph, false);
        let embedded = model::embed(&mut graph, &bound, &example.article_ids)?;
        let enc = model::encode(&mut graph, &bound, embedded, &vec![true; example.article_len()])?;
        Ok(Self {
            graph,
            bound,
            enc,
            example,
            use_coverage,
        })
    }

    fn start(&mut self) -> (LstmState, Var) {
        let cov = model::initial_coverage(&mut self.graph, &self.enc);
        (self.enc.init, cov)
    }

    fn step(&mut self, state: LstmState, prev: usize, coverage: Var) -> Result<(StepDist, LstmState, Var), DecodeError> {
        let input = to_fixed_id(prev, self.bound.dims.vocab_size);
        let out = model::decoder_step(
            &mut self.graph,
            &self.bound,
            state,
            input,
            &self.enc,
            &self.example.article_extended_ids,
            self.example.oov_words.len(),
            coverage,
            self.use_coverage,
        )?;
        let g = &self.graph;
        let dist = StepDist {
            p_final: g.value(out.p_final).data().to_vec(),
            p_vocab: g.value(out.p_vocab).data().to_vec(),
            attention: g.value(out.attention).data().to_vec(),
            p_gen: g.value(out.p_gen).item(),
        };
        Ok((dist, out.state, out.next_coverage))
    }
}

/// Picks the most probable id at every step, feeding it back as the next
/// input. `STOP` is unavailable before `min_len` tokens.
pub fn greedy_decode(
    params: &ModelParams,
    example: &EncodedExample,
    use_coverage: bool,
    max_len: usize,
    min_len: usize,
) -> Result<DecodedSummary, DecodeError> {
    DecodeOptions {
        beam_size: 1,
        max_len,
        min_len,
    }
    .check()?;
    let mut s = Session::new(params, example, use_coverage)?;
    let (mut state, mut coverage) = s.start();
    let mut out = DecodedSummary {
        ids: Vec::new(),
        origins: Vec::new(),
        attention: Vec::new(),
        log_prob: 0.0,
    };
    let mut prev = START;
    for t in 0..max_len {
        let (dist, next_state, next_cov) = s.step(state, prev, coverage)?;
        let id = dist.ranked(t, min_len, false)[0];
        out.ids.push(id);
        out.origins.push(dist.origin(id, &example.article_extended_ids));
        out.log_prob += dist.p_final[id].ln();
        out.attention.push(dist.attention);
        if id == STOP {
            break;
        }
        (state, coverage, prev) = (next_state, next_cov, id);
    }
    Ok(out)
}

#[derive(Clone)]
struct Hypothesis {
    summary: DecodedSummary,
    state: LstmState,
    coverage: Var,
}

impl Hypothesis {
    fn score(&self) -> f64 {
        self.summary.mean_log_prob()
    }
}

/// Beam search ranked by mean log-probability per token.
///
/// Each live hypothesis proposes its `beam_size` most probable continuations;
/// the best `beam_size` non-final candidates survive. `UNK` proposals are
/// pruned when `beam_size > 1`, so a beam of one is exactly greedy search.
pub fn beam_decode(
    params: &ModelParams,
    example: &EncodedExample,
    use_coverage: bool,
    options: DecodeOptions,
) -> Result<DecodedSummary, DecodeError> {
    options.check()?;
    let DecodeOptions {
        beam_size,
        max_len,
        min_len,
    } = options;
    let block_unk = beam_size > 1;
    let mut s = Session::new(params, example, use_coverage)?;
    let (state, coverage) = s.start();
    let mut live = vec![Hypothesis {
        summary: DecodedSummary {
            ids: Vec::new(),
            origins: Vec::new(),
            attention: Vec::new(),
            log_prob: 0.0,
        },
        state,
        coverage,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for t in 0..max_len {
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for h in &live {
            let prev = h.summary.ids.last().copied().unwrap_or(START);
            let (dist, next_state, next_cov) = s.step(h.state, prev, h.coverage)?;
            for id in dist.ranked(t, min_len, block_unk).into_iter().take(beam_size) {
                let mut summary = h.summary.clone();
                summary.ids.push(id);
                summary.origins.push(dist.origin(id, &example.article_extended_ids));
                summary.log_prob += dist.p_final[id].ln();
                summary.attention.push(dist.attention.clone());
                candidates.push(Hypothesis {
                    summary,
                    state: next_state,
                    coverage: next_cov,
                });
            }
        }
        // Stable sort keeps parent order, then id order, among equal scores.
        candidates.sort_by(|a, b| b.score().total_cmp(&a.score()));
        live.clear();
        for c in candidates {
            if c.summary.finished() {
                finished.push(c);
            } else {
                live.push(c);
            }
            if live.len() == beam_size || finished.len() >= beam_size {
                break;
            }
        }
        if finished.len() >= beam_size || live.is_empty() {
            break;
        }
    }
    let pool = if finished.is_empty() { live } else { finished };
    let best = pool
        .into_iter()
        .reduce(|best, h| if h.score() > best.score() { h } else { best })
        .expect("beam never empties before a result exists");
    Ok(best.summary)
}

/// Text of `ids`: vocabulary words, then article OOVs for ids `>= V`.
/// Control markers are dropped; `UNK` renders as `[UNK]`.
pub fn render(ids: &[usize], vocab: &Vocabulary, oov_words: &[String]) -> Result<String, DecodeError> {
    let v = vocab.len();
    let mut words = Vec::with_capacity(ids.len());
    for &id in ids {
        if matches!(id, PAD | START | STOP) {
            continue;
        }
        let word = if id < v {
            vocab.token(id).expect("id below vocabulary size")
        } else {
            oov_words
                .get(id - v)
                .map(String::as_str)
                .ok_or(DecodeError::IdOutOfRange {
                    id,
                    n_oov: oov_words.len(),
                })?
        };
        words.push(word);
    }
    Ok(words.join(" "))
}

/// One line of a decode output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub id: usize,
    pub summary: String,
    pub origin_tags: Vec<Origin>,
    pub mean_logprob: f64,
}

impl DecodeRecord {
    pub fn new(id: usize, decoded: &DecodedSummary, vocab: &Vocabulary, oov_words: &[String]) -> Result<Self, DecodeError> {
        let origin_tags = decoded
            .ids
            .iter()
            .zip(&decoded.origins)
            .filter(|(&i, _)| !matches!(i, PAD | START | STOP))
            .map(|(_, &o)| o)
            .collect();
        Ok(Self {
            id,
            summary: render(&decoded.ids, vocab, oov_words)?,
            origin_tags,
            mean_logprob: decoded.mean_log_prob(),
        })
    }
}

/// n-grams (n = 1..=3) that occur more than once, with their counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepetitionStats<T: Ord> {
    pub repeated: [BTreeMap<Vec<T>, usize>; 3],
}

impl<T: Ord> RepetitionStats<T> {
    /// Occurrences beyond the first, summed over repeated n-grams.
    pub fn excess(&self, n: usize) -> usize {
        self.repeated[n - 1].values().map(|c| c - 1).sum()
    }
}

pub fn repetition_stats<T: Ord + Clone>(tokens: &[T]) -> RepetitionStats<T> {
    let mut stats = RepetitionStats::<T> {
        repeated: Default::default(),
    };
    for n in 1..=3 {
        let mut counts: BTreeMap<Vec<T>, usize> = BTreeMap::new();
        for w in tokens.windows(n) {
            *counts.entry(w.to_vec()).or_default() += 1;
        }
        counts.retain(|_, c| *c > 1);
        stats.repeated[n - 1] = counts;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["the", "cat", "sat", "on", "mat", "a"].map(String::from)).unwrap()
    }

    #[test]
    fn render_resolves_oovs_and_strips_markers() {
        let v = vocab();
        let n = v.len();
        let oov = vec!["zorp".to_string()];
        assert_eq!(render(&[4, n, STOP], &v, &oov).unwrap(), "the zorp");
        assert_eq!(render(&[], &v, &oov).unwrap(), "");
        assert_eq!(render(&[START, UNK, 5], &v, &oov).unwrap(), "[UNK] cat");
        assert!(matches!(render(&[n + 1], &v, &oov), Err(DecodeError::IdOutOfRange { .. })));
    }

    #[test]
    fn repetition_counts() {
        let s = repetition_stats(&["a", "b", "a", "b"]);
        assert_eq!(s.repeated[0].keys().cloned().collect::<Vec<_>>(), [vec!["a"], vec!["b"]]);
        assert_eq!(s.repeated[1].keys().cloned().collect::<Vec<_>>(), [vec!["a", "b"]]);
        assert!(s.repeated[2].is_empty());
        assert_eq!(s.excess(1), 2);
        let s = repetition_stats(&[1, 2, 3, 4]);
        assert_eq!((s.excess(1), s.excess(2), s.excess(3)), (0, 0, 0));
    }

    fn toy_model(seed: u64) -> (ModelParams, EncodedExample) {
        let dims = ModelDims {
            vocab_size: 10,
            emb_dim: 4,
            hidden_dim: 4,
        };
        let ex = EncodedExample {
            article_ids: vec![4, UNK, 5, 6],
            article_extended_ids: vec![4, 10, 5, 6],
            oov_words: vec!["zorp".into()],
            summary_input_ids: vec![START],
            summary_target_extended_ids: vec![STOP],
        };
        (ModelParams::random(dims, seed, 1.0), ex)
    }

    #[test]
    fn greedy_respects_lengths_and_is_deterministic() {
        let (p, ex) = toy_model(1);
        let one = greedy_decode(&p, &ex, true, 1, 1).unwrap();
        assert_eq!(one.ids.len(), 1);
        assert_ne!(one.ids[0], STOP);
        let a = greedy_decode(&p, &ex, true, 12, 3).unwrap();
        assert_eq!(a, greedy_decode(&p, &ex, true, 12, 3).unwrap());
        assert!(a.ids.iter().position(|&i| i == STOP).map_or(true, |pos| pos >= 3));
        assert!(greedy_decode(&p, &ex, true, 2, 3).is_err());
    }

    #[test]
    fn beam_of_one_is_greedy() {
        for seed in 0..10 {
            let (p, ex) = toy_model(seed);
            let g = greedy_decode(&p, &ex, true, 15, 2).unwrap();
            let b = beam_decode(&p, &ex, true, DecodeOptions { beam_size: 1, max_len: 15, min_len: 2 }).unwrap();
            assert_eq!(g, b);
        }
    }

    #[test]
    fn beam_stops_early_when_hypotheses_finish() {
        let (mut p, ex) = toy_model(3);
        // Make STOP overwhelmingly likely from the vocabulary and never copy.
        let b2 = p.get_mut("vocab.b2").unwrap();
        b2.data_mut()[STOP] = 50.0;
        p.get_mut("gen.b").unwrap().data_mut()[0] = 50.0;
        let out = beam_decode(&p, &ex, true, DecodeOptions { beam_size: 3, max_len: 40, min_len: 2 }).unwrap();
        assert_eq!(out.ids.len(), 3);
        assert!(out.finished());
    }

    #[test]
    fn beam_never_emits_unk() {
        let (mut p, ex) = toy_model(4);
        p.get_mut("vocab.b2").unwrap().data_mut()[UNK] = 50.0;
        p.get_mut("gen.b").unwrap().data_mut()[0] = 50.0;
        let out = beam_decode(&p, &ex, true, DecodeOptions { beam_size: 2, max_len: 6, min_len: 1 }).unwrap();
        assert!(!out.ids.contains(&UNK));
        let g = greedy_decode(&p, &ex, true, 6, 1).unwrap();
        assert!(g.ids.contains(&UNK));
    }
}
