use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, CheckpointMeta, FORMAT_VERSION};
use super::{TrainError, TrainingConfig};
use crate::autodiff::{clip_global_norm, Adagrad, AutodiffError, Graph, Tensor};
use crate::corpus::{Batch, EncodedExample, Vocabulary};
use crate::model::{self, ModelDims, ModelError, ModelParams, COVERAGE_WEIGHT};

/// Where training starts.
#[derive(Clone, Debug)]
pub enum Init {
    /// Fresh parameters drawn from the config seed.
    Fresh(ModelDims),
    Checkpoint(Checkpoint),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Lowest-validation-loss checkpoint (final parameters without a validation set).
    pub best: Checkpoint,
    pub best_val_loss: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub steps_run: usize,
}

/// `step,loss,val_loss` rows; `val_loss` is empty on steps without validation.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("step,loss,val_loss\n");
    for p in curve {
        match p.val_loss {
            Some(v) => s.push_str(&format!("{},{},{}\n", p.step, p.loss, v)),
            None => s.push_str(&format!("{},{},\n", p.step, p.loss)),
        }
    }
    s
}

/// Teacher-forced mean example loss over `examples`. Parameters are read only.
pub fn validate(
    params: &ModelParams,
    examples: &[EncodedExample],
    batch_size: usize,
    lambda: f64,
    use_coverage: bool,
) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    let mut total = 0.0;
    for chunk in examples.chunks(batch_size.max(1)) {
        let mut g = Graph::new();
        let bound = params.bind(&mut g, false);
        let batch = Batch::from_examples(chunk);
        let loss = model::sequence_loss(&mut g, &bound, &batch, lambda, use_coverage)?;
        total += g.value(loss).item() * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Validation loss of a checkpoint under its own coverage setting.
pub fn validate_checkpoint(ckpt: &Checkpoint, examples: &[EncodedExample]) -> Result<f64, ModelError> {
    let c = &ckpt.meta.config;
    validate(&ckpt.params, examples, c.batch_size, c.lambda, ckpt.meta.coverage_enabled)
}

/// One optimisation step on `batch`. Returns the loss before the update.
pub fn train_step(
    params: &mut ModelParams,
    optimizer: &mut Adagrad,
    batch: &Batch,
    lambda: f64,
    use_coverage: bool,
    clip_norm: f64,
) -> Result<f64, ModelError> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g, true);
    let loss = model::sequence_loss(&mut g, &bound, batch, lambda, use_coverage)?;
    let value = g.value(loss).item();
    g.backward(loss)?;
    let named = bound.named();
    let mut grads: Vec<Tensor> = named
        .iter()
        .map(|&(name, var)| {
            g.grad(var)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(params.get(name).expect("bound parameter").shape()))
        })
        .collect();
    clip_global_norm(&mut grads, clip_norm);
    for ((name, _), grad) in named.iter().zip(&grads) {
        let param = params.get_mut(name).expect("bound parameter");
        optimizer.step(name, param, grad)?;
    }
    Ok(value)
}

fn is_non_finite(e: &ModelError) -> bool {
    matches!(e, ModelError::Autodiff(AutodiffError::NonFinite { .. }))
}

/// Trains with Adagrad, clipping and validation-driven checkpoint selection.
///
/// From fresh parameters (or a checkpoint trained without coverage) the last
/// [`TrainingConfig::coverage_steps`] steps run with coverage; the coverage
/// weight is zeroed when that phase starts and selection restarts because
/// losses with and without the coverage term are not comparable. Running out
/// of patience before the coverage phase skips straight to it. A checkpoint
/// already trained with coverage keeps it for the whole run.
pub fn train(
    config: &TrainingConfig,
    vocab: &Vocabulary,
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
    init: Init,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let vocab_hash = vocab.fingerprint();
    let (mut params, base_step, mut coverage, init_ckpt) = match init {
        Init::Fresh(dims) => (ModelParams::init(dims, config.seed), 0, false, None),
        Init::Checkpoint(ck) => {
            if ck.meta.vocab_hash != vocab_hash {
                return Err(TrainError::VocabMismatch {
                    checkpoint: ck.meta.vocab_hash.clone(),
                    corpus: vocab_hash,
                });
            }
            (ck.params.clone(), ck.meta.step, ck.meta.coverage_enabled, Some(ck))
        }
    };
    let dims = params.dims();
    if dims.vocab_size != vocab.len() {
        return Err(TrainError::DimsMismatch(format!(
            "model vocabulary {} but corpus vocabulary {}",
            dims.vocab_size,
            vocab.len()
        )));
    }

    let snapshot = |params: &ModelParams, steps: usize, coverage: bool| Checkpoint {
        meta: CheckpointMeta {
            format_version: FORMAT_VERSION,
            dims,
            vocab_hash: vocab_hash.clone(),
            step: base_step + steps as u64,
            coverage_enabled: coverage,
            config: config.clone(),
        },
        params: params.clone(),
    };

    let mut optimizer = Adagrad::new(
        config.learning_rate,
        config.adagrad_epsilon,
        config.adagrad_initial_accumulator,
    )?;
    let has_val = !val_set.is_empty();
    let mut best: Option<Checkpoint> = None;
    let mut best_val = f64::INFINITY;
    if let (Some(ck), true) = (&init_ckpt, has_val) {
        best_val = validate_checkpoint(ck, val_set)?;
        best = Some(ck.clone());
    }
    let mut bad_validations = 0;

    let coverage_steps = if coverage { 0 } else { config.coverage_steps() };
    let mut end = config.max_steps;
    let mut coverage_start = end - coverage_steps;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut curve = Vec::new();
    let mut step = 0;
    while step < end {
        if !coverage && step >= coverage_start {
            coverage = true;
            if let Some(w) = params.get_mut(COVERAGE_WEIGHT) {
                w.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            best = None;
            best_val = f64::INFINITY;
            bad_validations = 0;
        }
        if cursor >= order.len() {
            order = (0..train_set.len()).collect();
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let take = config.batch_size.min(order.len() - cursor);
        let chunk: Vec<EncodedExample> = order[cursor..cursor + take]
            .iter()
            .map(|&i| train_set[i].clone())
            .collect();
        cursor += take;
        let batch = Batch::from_examples(&chunk);

        let last_good = |params: &ModelParams, best: &Option<Checkpoint>| {
            Box::new(best.clone().unwrap_or_else(|| snapshot(params, step, coverage)))
        };
        let before = params.clone();
        let loss = match train_step(&mut params, &mut optimizer, &batch, config.lambda, coverage, config.clip_norm) {
            Ok(l) if l.is_finite() => l,
            Ok(_) => return Err(TrainError::NonFinite { step: step + 1, last_good: last_good(&before, &best) }),
            Err(e) if is_non_finite(&e) => {
                return Err(TrainError::NonFinite { step: step + 1, last_good: last_good(&before, &best) })
            }
            Err(e) => return Err(e.into()),
        };
        step += 1;

        let mut point = CurvePoint {
            step: base_step + step as u64,
            loss,
            val_loss: None,
        };
        if has_val && (step % config.validate_every == 0 || step == end) {
            let val = validate(&params, val_set, config.batch_size, config.lambda, coverage)?;
            point.val_loss = Some(val);
            if val < best_val {
                best_val = val;
                best = Some(snapshot(&params, step, coverage));
                bad_validations = 0;
            } else {
                bad_validations += 1;
                if bad_validations >= config.patience {
                    if !coverage && coverage_steps > 0 {
                        log::info!("validation stalled at step {step}; starting the coverage phase");
                        coverage_start = step;
                        end = step + coverage_steps;
                    } else {
                        log::info!("validation stalled at step {step}; stopping");
                        end = step;
                    }
                }
            }
        }
        log::debug!("step {} loss {loss:.5}", point.step);
        curve.push(point);
    }

    let best = match (best, has_val) {
        (Some(b), true) => b,
        _ => init_ckpt
            .filter(|_| step == 0)
            .unwrap_or_else(|| snapshot(&params, step, coverage)),
    };
    Ok(TrainOutcome {
        best,
        best_val_loss: has_val.then_some(best_val),
        curve,
        steps_run: step,
    })
}

/// Continues training `checkpoint` on a new corpus encoded with the same vocabulary.
/// Optimizer state starts afresh.
pub fn finetune(
    checkpoint: Checkpoint,
    config: &TrainingConfig,
    vocab: &Vocabulary,
    train_set: &[EncodedExample],
    val_set: &[EncodedExample],
) -> Result<TrainOutcome, TrainError> {
    train(config, vocab, train_set, val_set, Init::Checkpoint(checkpoint))
}
