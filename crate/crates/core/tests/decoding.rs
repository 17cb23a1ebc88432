use pgsum_core::corpus::{encode_subset, to_fixed_id, tokenize, EncodedExample, Vocabulary, START, STOP};
use pgsum_core::decoding::{beam_decode, greedy_decode, render, repetition_stats, DecodeOptions, DecodeRecord};
use pgsum_core::model::{ModelDims, ModelParams};
use pgsum_core::synthetic::distinct_meeting_pairs;
use pgsum_core::training::{train, Init, TrainingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOY: ModelDims = ModelDims {
    vocab_size: 10,
    emb_dim: 4,
    hidden_dim: 4,
};

fn random_case(seed: u64) -> (ModelParams, EncodedExample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..9);
    let mut oov = Vec::new();
    let extended: Vec<usize> = (0..n)
        .map(|_| {
            let w: usize = rng.gen_range(4..14);
            if w < 10 {
                w
            } else {
                let k = oov.iter().position(|&o| o == w).unwrap_or_else(|| {
                    oov.push(w);
                    oov.len() - 1
                });
                10 + k
            }
        })
        .collect();
    let ex = EncodedExample {
        article_ids: extended.iter().map(|&i| to_fixed_id(i, 10)).collect(),
        article_extended_ids: extended,
        oov_words: oov.iter().map(|w| format!("oov{w}")).collect(),
        summary_input_ids: vec![START],
        summary_target_extended_ids: vec![STOP],
    };
    (ModelParams::random(TOY, seed, rng.gen_range(0.3..2.0)), ex)
}

fn toy_vocab() -> Vocabulary {
    Vocabulary::from_tokens((4..10).map(|i| format!("w{i}"))).unwrap()
}

#[test]
fn min_and_max_length_are_respected() {
    for seed in 0..30 {
        let (p, ex) = random_case(seed);
        for beam in [1, 3] {
            let d = beam_decode(&p, &ex, true, DecodeOptions { beam_size: beam, max_len: 10, min_len: 4 }).unwrap();
            assert!(d.ids.len() <= 10);
            if let Some(pos) = d.ids.iter().position(|&i| i == STOP) {
                assert!(pos >= 4, "seed {seed}: STOP at {pos}");
                assert_eq!(pos, d.ids.len() - 1);
            }
        }
    }
}

#[test]
fn rendered_output_never_shows_raw_ids() {
    let vocab = toy_vocab();
    for seed in 0..30 {
        let (p, ex) = random_case(100 + seed);
        for d in [
            greedy_decode(&p, &ex, false, 12, 1).unwrap(),
            beam_decode(&p, &ex, false, DecodeOptions { beam_size: 4, max_len: 12, min_len: 1 }).unwrap(),
        ] {
            let text = render(&d.ids, &vocab, &ex.oov_words).unwrap();
            for word in text.split_whitespace() {
                assert!(word.starts_with('w') || word.starts_with("oov") || word == "[UNK]", "{word}");
            }
        }
    }
}

#[test]
fn decoding_leaves_parameters_alone() {
    let (p, ex) = random_case(7);
    let before = p.clone();
    greedy_decode(&p, &ex, true, 8, 2).unwrap();
    beam_decode(&p, &ex, true, DecodeOptions { beam_size: 3, max_len: 8, min_len: 2 }).unwrap();
    assert_eq!(p, before);
}

#[test]
fn decode_record_serialises_expected_fields() {
    let vocab = toy_vocab();
    let (p, ex) = random_case(9);
    let d = greedy_decode(&p, &ex, true, 6, 1).unwrap();
    let rec = DecodeRecord::new(4, &d, &vocab, &ex.oov_words).unwrap();
    let json = serde_json::to_value(&rec).unwrap();
    assert_eq!(json["id"], 4);
    let shown = d.ids.iter().filter(|&&i| i != STOP).count();
    assert_eq!(json["origin_tags"].as_array().unwrap().len(), shown);
    assert!((json["mean_logprob"].as_f64().unwrap() - d.mean_log_prob()).abs() < 1e-15);
}

/// Beam search ranked by mean log-probability is not guaranteed to beat the
/// greedy path: a finished hypothesis is preferred over a better unfinished
/// one, and UNK pruning can remove the greedy path outright.
#[test]
#[ignore = "search dominance does not hold for every model; counterexamples are reported"]
fn beam_mean_log_prob_dominates_greedy() {
    let mut counterexamples = Vec::new();
    for seed in 0..200 {
        let (p, ex) = random_case(1000 + seed);
        let g = greedy_decode(&p, &ex, true, 12, 2).unwrap();
        let b = beam_decode(&p, &ex, true, DecodeOptions { beam_size: 4, max_len: 12, min_len: 2 }).unwrap();
        if b.mean_log_prob() < g.mean_log_prob() - 1e-12 {
            counterexamples.push((seed, g.mean_log_prob(), b.mean_log_prob()));
        }
    }
    assert!(counterexamples.is_empty(), "{} of 200 models: {counterexamples:?}", counterexamples.len());
}

#[test]
fn coverage_model_repeats_no_more_than_plain_model() {
    let raw = distinct_meeting_pairs(8, 0);
    let vocab = Vocabulary::build(
        raw.iter().map(|r| tokenize(&r.article).into_iter().chain(tokenize(&r.summary))),
        1000,
    )
    .unwrap();
    let ex = encode_subset(&raw, &(0..8).collect::<Vec<_>>(), &vocab, 400, 100).unwrap();
    let dims = ModelDims {
        vocab_size: vocab.len(),
        emb_dim: 16,
        hidden_dim: 32,
    };
    let repeats = |coverage_fraction: f64| {
        let cfg = TrainingConfig {
            max_steps: 1000,
            batch_size: 8,
            coverage_fraction,
            ..TrainingConfig::default()
        };
        let out = train(&cfg, &vocab, &ex, &[], Init::Fresh(dims)).unwrap();
        assert_eq!(out.best.meta.coverage_enabled, coverage_fraction > 0.0);
        ex.iter()
            .map(|e| {
                let d = greedy_decode(&out.best.params, e, out.best.meta.coverage_enabled, 30, 1).unwrap();
                repetition_stats(&d.ids).excess(3)
            })
            .sum::<usize>()
    };
    let with = repeats(0.2);
    let without = repeats(0.0);
    assert!(with <= without, "coverage {with} vs plain {without}");
}
