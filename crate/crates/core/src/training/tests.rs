use super::*;
use crate::autodiff::{Adagrad, Graph};
use crate::corpus::{encode_subset, tokenize, Batch, EncodedExample, Vocabulary};
use crate::model::{self, ModelDims, ModelParams, COVERAGE_WEIGHT};
use crate::synthetic::distinct_meeting_pairs;

fn corpus(n: usize) -> (Vocabulary, Vec<EncodedExample>) {
    let raw = distinct_meeting_pairs(n, 11);
    let vocab = Vocabulary::build(
        raw.iter().map(|r| tokenize(&r.article).into_iter().chain(tokenize(&r.summary))),
        30,
    )
    .unwrap();
    let ids: Vec<usize> = (0..n).collect();
    let ex = encode_subset(&raw, &ids, &vocab, 400, 100).unwrap();
    (vocab, ex)
}

fn dims(vocab: &Vocabulary) -> ModelDims {
    ModelDims {
        vocab_size: vocab.len(),
        emb_dim: 6,
        hidden_dim: 8,
    }
}

fn quick_config(steps: usize) -> TrainingConfig {
    TrainingConfig {
        max_steps: steps,
        batch_size: 3,
        validate_every: 5,
        ..TrainingConfig::default()
    }
}

#[test]
fn training_is_deterministic() {
    let (vocab, ex) = corpus(6);
    let cfg = quick_config(12);
    let a = train(&cfg, &vocab, &ex[..4], &ex[4..], Init::Fresh(dims(&vocab))).unwrap();
    let b = train(&cfg, &vocab, &ex[..4], &ex[4..], Init::Fresh(dims(&vocab))).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(encode_checkpoint(&a.best), encode_checkpoint(&b.best));
    assert_eq!(a.steps_run, 12);
}

#[test]
fn coverage_phase_covers_the_final_steps() {
    let (vocab, ex) = corpus(4);
    let cfg = TrainingConfig {
        coverage_fraction: 0.5,
        ..quick_config(120)
    };
    assert_eq!(cfg.coverage_steps(), 60);
    let out = train(&cfg, &vocab, &ex, &[], Init::Fresh(dims(&vocab))).unwrap();
    assert!(out.best.meta.coverage_enabled);
    assert_eq!(out.best.meta.step, 120);
    assert_ne!(out.best.params.get(COVERAGE_WEIGHT).unwrap().l2_norm_sq(), 0.0);
}

#[test]
fn zero_step_finetune_returns_the_input() {
    let (vocab, ex) = corpus(5);
    let pre = train(&quick_config(6), &vocab, &ex[..3], &ex[3..], Init::Fresh(dims(&vocab))).unwrap();
    let out = finetune(pre.best.clone(), &quick_config(0), &vocab, &ex[..3], &ex[3..]).unwrap();
    assert_eq!(out.steps_run, 0);
    assert_eq!(encode_checkpoint(&out.best), encode_checkpoint(&pre.best));
    let out = finetune(pre.best.clone(), &quick_config(0), &vocab, &ex[..3], &[]).unwrap();
    assert_eq!(encode_checkpoint(&out.best), encode_checkpoint(&pre.best));
}

#[test]
fn finetune_rejects_a_different_vocabulary() {
    let (vocab, ex) = corpus(4);
    let pre = train(&quick_config(2), &vocab, &ex, &[], Init::Fresh(dims(&vocab))).unwrap();
    let other = Vocabulary::from_tokens((0..vocab.len() - 4).map(|i| format!("w{i}"))).unwrap();
    let err = finetune(pre.best, &quick_config(2), &other, &ex, &[]).unwrap_err();
    assert!(matches!(err, TrainError::VocabMismatch { .. }), "{err}");
}

#[test]
fn finetune_continues_step_count_and_improves_held_in_loss() {
    let (vocab, ex) = corpus(6);
    let pre = train(&quick_config(10), &vocab, &ex, &[], Init::Fresh(dims(&vocab))).unwrap();
    let before = validate_checkpoint(&pre.best, &ex[..3]).unwrap();
    let out = finetune(pre.best.clone(), &quick_config(30), &vocab, &ex[..3], &ex[..3]).unwrap();
    assert!(out.best.meta.step > pre.best.meta.step);
    assert!(out.best_val_loss.unwrap() < before);
    assert!(validate_checkpoint(&out.best, &ex[..3]).unwrap() < before);
}

#[test]
fn update_norm_is_bounded_on_fresh_accumulators() {
    let (vocab, ex) = corpus(4);
    let batch = Batch::from_examples(&ex);
    for seed in 0..3 {
        let mut params = ModelParams::random(dims(&vocab), seed, 1.0);
        let before = params.clone();
        let mut opt = Adagrad::new(0.15, 1e-10, 0.1).unwrap();
        train_step(&mut params, &mut opt, &batch, 1.0, true, 2.0).unwrap();
        let delta: f64 = params
            .iter()
            .zip(before.iter())
            .flat_map(|((_, a), (_, b))| a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)))
            .sum::<f64>()
            .sqrt();
        let bound = 0.15 * 2.0 / 0.1f64.sqrt();
        assert!(delta > 0.0 && delta <= bound + 1e-12, "{delta} vs {bound}");
    }
}

#[test]
fn adagrad_accumulators_never_shrink() {
    let (vocab, ex) = corpus(4);
    let batch = Batch::from_examples(&ex[..2]);
    let mut params = ModelParams::init(dims(&vocab), 5);
    let mut opt = Adagrad::new(0.15, 1e-10, 0.1).unwrap();
    let mut last: Option<Vec<f64>> = None;
    for _ in 0..5 {
        train_step(&mut params, &mut opt, &batch, 1.0, false, 2.0).unwrap();
        let acc = opt.accumulator("vocab.w2").unwrap().to_vec();
        if let Some(prev) = &last {
            assert!(acc.iter().zip(prev).all(|(a, b)| a >= b));
        }
        last = Some(acc);
    }
}

#[test]
fn validation_is_pure_and_repeatable() {
    let (vocab, ex) = corpus(5);
    let params = ModelParams::random(dims(&vocab), 9, 0.3);
    let snapshot = params.clone();
    let a = validate(&params, &ex, 2, 1.0, true).unwrap();
    assert_eq!(a, validate(&params, &ex, 2, 1.0, true).unwrap());
    assert_eq!(params, snapshot);
    // Batching only changes grouping, not the example-weighted mean.
    assert!((a - validate(&params, &ex, 5, 1.0, true).unwrap()).abs() < 1e-12);
}

#[test]
fn zeroed_coverage_weight_adds_only_the_coverage_term() {
    let (vocab, ex) = corpus(3);
    let mut params = ModelParams::random(dims(&vocab), 4, 0.5);
    params.get_mut(COVERAGE_WEIGHT).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
    let lambda = 0.7;
    for e in &ex {
        let plain = validate(&params, std::slice::from_ref(e), 1, lambda, false).unwrap();
        let with_cov = validate(&params, std::slice::from_ref(e), 1, lambda, true).unwrap();

        let mut g = Graph::new();
        let b = params.bind(&mut g, false);
        let emb = model::embed(&mut g, &b, &e.article_ids).unwrap();
        let enc = model::encode(&mut g, &b, emb, &vec![true; e.article_len()]).unwrap();
        let mut state = enc.init;
        let mut cov = vec![0.0; e.article_len()];
        let zero_cov = model::initial_coverage(&mut g, &enc);
        let mut term = 0.0;
        for &input in &e.summary_input_ids {
            let out = model::decoder_step(
                &mut g,
                &b,
                state,
                input,
                &enc,
                &e.article_extended_ids,
                e.oov_words.len(),
                zero_cov,
                false,
            )
            .unwrap();
            let a = g.value(out.attention).data();
            term += a.iter().zip(&cov).map(|(x, c)| x.min(*c)).sum::<f64>();
            cov.iter_mut().zip(a).for_each(|(c, x)| *c += x);
            state = out.state;
        }
        let expected = plain + lambda * term / e.summary_len() as f64;
        assert!((with_cov - expected).abs() < 1e-10, "{with_cov} vs {expected}");
    }
}

#[test]
fn curve_csv_leaves_missing_validations_empty() {
    let curve = vec![
        CurvePoint {
            step: 1,
            loss: 2.5,
            val_loss: None,
        },
        CurvePoint {
            step: 2,
            loss: 2.0,
            val_loss: Some(1.5),
        },
    ];
    assert_eq!(curve_csv(&curve), "step,loss,val_loss\n1,2.5,\n2,2,1.5\n");
}

#[test]
fn empty_training_set_is_rejected() {
    let (vocab, _) = corpus(3);
    let err = train(&quick_config(1), &vocab, &[], &[], Init::Fresh(dims(&vocab))).unwrap_err();
    assert!(matches!(err, TrainError::EmptyTrainSet));
}
