use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use pgsum_core::corpus::{
    encode_subset, ingest, read_canonical, read_manifest, read_vocab, split_dataset, EncodedExample, Format,
    Preprocessed, RawExample, SplitManifest, Vocabulary, CORPUS_FILE, MANIFEST_FILE, VOCAB_FILE,
};
use pgsum_core::decoding::{beam_decode, greedy_decode, DecodeOptions, DecodeRecord};
use pgsum_core::fsio::write_atomic;
use pgsum_core::metrics::{
    score_example, Comparison, ExecEmbedder, ExecExtractor, FactEmbedder, FactExtractor, HashedEmbedder,
    LexiconExtractor, ScoreReport,
};
use pgsum_core::model::ModelDims;
use pgsum_core::training::{self, curve_csv, load_checkpoint, save_checkpoint, Checkpoint, Init, TrainingConfig};

use crate::{DecodeArgs, EvaluateArgs, FinetuneArgs, PreprocessArgs, ReportArgs, TrainArgs, TrainingFlags};

pub const CHECKPOINT_FILE: &str = "checkpoint.pgnc";
pub const CURVE_FILE: &str = "loss_curve.csv";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const SERIES_FILE: &str = "series.csv";
pub const COMPARISON_TEXT: &str = "comparison.txt";
pub const COMPARISON_CSV: &str = "comparison.csv";

fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(path.is_file(), "{what} {} does not exist", path.display());
    Ok(())
}

fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_ratios(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split([',', ':'])
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad ratio `{p}`")))
        .collect::<Result<_>>()?;
    ensure!(parts.len() == 3, "expected three ratios, got {}", parts.len());
    ensure!(parts.iter().all(|&r| r > 0.0), "ratios must be positive");
    let total: f64 = parts.iter().sum();
    Ok([parts[0] / total, parts[1] / total, parts[2] / total])
}

pub fn preprocess(a: PreprocessArgs) -> Result<()> {
    require_file(&a.input, "input")?;
    if let Some(v) = &a.vocab {
        require_file(v, "vocabulary")?;
    }
    let format: Format = a.format.parse()?;
    let ratios = parse_ratios(&a.ratios)?;
    let examples = ingest(&a.input, format, &a.article_field, &a.summary_field)?;
    let pre = match &a.vocab {
        Some(v) => Preprocessed {
            manifest: split_dataset(examples.len(), ratios, a.seed)?,
            vocab: read_vocab(v)?,
            examples,
        },
        None => pgsum_core::corpus::preprocess(examples, a.vocab_size, ratios, a.seed)?,
    };
    pre.write_to_dir(&a.out_dir)?;
    let m = &pre.manifest;
    println!(
        "{} examples -> train {} / validation {} / test {}; vocabulary {}",
        pre.examples.len(),
        m.train.len(),
        m.validation.len(),
        m.test.len(),
        pre.vocab.len()
    );
    Ok(())
}

struct Data {
    examples: Vec<RawExample>,
    manifest: SplitManifest,
    vocab: Vocabulary,
}

impl Data {
    fn load(dir: &Path, vocab: Option<&Path>) -> Result<Self> {
        let vocab_path = vocab.map(Path::to_path_buf).unwrap_or_else(|| dir.join(VOCAB_FILE));
        for (p, what) in [
            (dir.join(CORPUS_FILE), "corpus"),
            (dir.join(MANIFEST_FILE), "manifest"),
            (vocab_path.clone(), "vocabulary"),
        ] {
            require_file(&p, what)?;
        }
        let examples = read_canonical(&dir.join(CORPUS_FILE))?;
        let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
        let n = examples.len();
        ensure!(
            manifest.train.iter().chain(&manifest.validation).chain(&manifest.test).all(|&i| i < n),
            "manifest refers to examples beyond the {n} in the corpus"
        );
        Ok(Self {
            examples,
            manifest,
            vocab: read_vocab(&vocab_path)?,
        })
    }

    fn split_ids(&self, split: &str) -> Result<&[usize]> {
        self.manifest
            .split(split)
            .with_context(|| format!("unknown split `{split}` (expected train, validation or test)"))
    }

    fn encode(&self, split: &str, config: &TrainingConfig) -> Result<Vec<EncodedExample>> {
        Ok(encode_subset(
            &self.examples,
            self.split_ids(split)?,
            &self.vocab,
            config.max_article_len,
            config.max_summary_len,
        )?)
    }
}

fn resolve_config(base: TrainingConfig, flags: &TrainingFlags) -> Result<TrainingConfig> {
    let mut c = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut value = serde_json::to_value(&base)?;
            let overrides: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let (Some(dst), Some(src)) = (value.as_object_mut(), overrides.as_object()) else {
                bail!("{} must hold a JSON object", path.display());
            };
            for (k, v) in src {
                ensure!(dst.contains_key(k), "unknown setting `{k}` in {}", path.display());
                dst.insert(k.clone(), v.clone());
            }
            serde_json::from_value(value)?
        }
        None => base,
    };
    if let Some(v) = flags.max_steps {
        c.max_steps = v;
    }
    if let Some(v) = flags.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = flags.lr {
        c.learning_rate = v;
    }
    if let Some(v) = flags.coverage_frac {
        c.coverage_fraction = v;
        c.coverage_phase_steps = None;
    }
    if let Some(v) = flags.lambda {
        c.lambda = v;
    }
    if let Some(v) = flags.validate_every {
        c.validate_every = v;
    }
    if let Some(v) = flags.patience {
        c.patience = v;
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

fn write_training_outputs(out_dir: &Path, outcome: &training::TrainOutcome, vocab: &Vocabulary) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    save_checkpoint(&outcome.best, &out_dir.join(CHECKPOINT_FILE))?;
    write_output(out_dir, CURVE_FILE, curve_csv(&outcome.curve).as_bytes())?;
    let mut v = Vec::new();
    vocab.write_to(&mut v)?;
    write_output(out_dir, VOCAB_FILE, &v)?;
    println!(
        "ran {} steps; checkpoint at step {} (coverage {})",
        outcome.steps_run,
        outcome.best.meta.step,
        if outcome.best.meta.coverage_enabled { "on" } else { "off" }
    );
    match outcome.best_val_loss {
        Some(v) => println!("final validation loss: {v:.6}"),
        None => println!("final validation loss: n/a (empty validation split)"),
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let data = Data::load(&a.data, a.vocab.as_deref())?;
    let config = resolve_config(TrainingConfig::default(), &a.training)?;
    let dims = ModelDims {
        vocab_size: data.vocab.len(),
        emb_dim: a.emb_dim,
        hidden_dim: a.hidden_dim,
    };
    ensure!(dims.emb_dim > 0 && dims.hidden_dim > 0, "dimensions must be positive");
    let train_set = data.encode("train", &config)?;
    let val_set = data.encode("validation", &config)?;
    let outcome = training::train(&config, &data.vocab, &train_set, &val_set, Init::Fresh(dims))?;
    write_training_outputs(&a.out_dir, &outcome, &data.vocab)
}

fn checkpoint_vocab(checkpoint: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        checkpoint.parent().unwrap_or(Path::new(".")).join(VOCAB_FILE)
    })
}

fn check_vocab(ckpt: &Checkpoint, vocab: &Vocabulary) -> Result<()> {
    ensure!(
        ckpt.meta.vocab_hash == vocab.fingerprint(),
        "checkpoint was trained with a different vocabulary (checkpoint {}, vocabulary {})",
        ckpt.meta.vocab_hash,
        vocab.fingerprint()
    );
    Ok(())
}

pub fn finetune(a: FinetuneArgs) -> Result<()> {
    require_file(&a.checkpoint, "checkpoint")?;
    let vocab_path = checkpoint_vocab(&a.checkpoint, a.vocab.as_deref());
    let data = Data::load(&a.data, Some(&vocab_path))?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    check_vocab(&ckpt, &data.vocab)?;
    let config = resolve_config(ckpt.meta.config.clone(), &a.training)?;
    let train_set = data.encode("train", &config)?;
    let val_set = data.encode("validation", &config)?;
    let outcome = training::finetune(ckpt, &config, &data.vocab, &train_set, &val_set)?;
    write_training_outputs(&a.out_dir, &outcome, &data.vocab)
}

pub fn decode(a: DecodeArgs) -> Result<()> {
    require_file(&a.checkpoint, "checkpoint")?;
    let vocab_path = checkpoint_vocab(&a.checkpoint, a.vocab.as_deref());
    let data = Data::load(&a.data, Some(&vocab_path))?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    check_vocab(&ckpt, &data.vocab)?;
    ensure!(
        a.max_len >= a.min_len && a.min_len >= 1,
        "need --max-len >= --min-len >= 1"
    );
    ensure!(a.greedy || a.beam_size >= 1, "--beam-size must be at least 1");
    let ids = data.split_ids(&a.split)?.to_vec();
    let encoded = data.encode(&a.split, &ckpt.meta.config)?;
    let coverage = ckpt.meta.coverage_enabled;
    let mut out = String::new();
    for (&id, ex) in ids.iter().zip(&encoded) {
        let decoded = if a.greedy {
            greedy_decode(&ckpt.params, ex, coverage, a.max_len, a.min_len)?
        } else {
            let options = DecodeOptions {
                beam_size: a.beam_size,
                max_len: a.max_len,
                min_len: a.min_len,
            };
            beam_decode(&ckpt.params, ex, coverage, options)?
        };
        let record = DecodeRecord::new(id, &decoded, &data.vocab, &ex.oov_words)?;
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
        log::info!("decoded example {id}");
    }
    let path = write_output(&a.out_dir, SUMMARIES_FILE, out.as_bytes())?;
    println!("wrote {} summaries to {}", ids.len(), path.display());
    Ok(())
}

fn exec_path(spec: &str) -> Result<Option<PathBuf>> {
    match spec.strip_prefix("exec:") {
        Some(p) => {
            let path = PathBuf::from(p);
            require_file(&path, "adapter")?;
            Ok(Some(path))
        }
        None => Ok(None),
    }
}

fn extractor(spec: &str) -> Result<Box<dyn FactExtractor>> {
    Ok(match (spec, exec_path(spec)?) {
        (_, Some(program)) => Box::new(ExecExtractor { program }),
        ("builtin", None) => Box::new(LexiconExtractor::default()),
        _ => bail!("unknown extractor `{spec}` (expected builtin or exec:PATH)"),
    })
}

fn embedder(spec: &str, width: usize) -> Result<Box<dyn FactEmbedder>> {
    ensure!(width > 0, "--embedding-width must be positive");
    Ok(match (spec, exec_path(spec)?) {
        (_, Some(program)) => Box::new(ExecEmbedder { program, width }),
        ("hashed", None) => Box::new(HashedEmbedder { width }),
        _ => bail!("unknown embedder `{spec}` (expected hashed or exec:PATH)"),
    })
}

fn read_summaries(path: &Path) -> Result<Vec<DecodeRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn describe_ids(ids: &BTreeSet<usize>) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_file(&a.summaries, "summaries")?;
    let extractor = extractor(&a.extractor)?;
    let embedder = embedder(&a.embedder, a.embedding_width)?;
    let data = Data::load(&a.data, None)?;
    let records = read_summaries(&a.summaries)?;
    let expected: BTreeSet<usize> = data.split_ids(&a.split)?.iter().copied().collect();
    let got: BTreeSet<usize> = records.iter().map(|r| r.id).collect();
    ensure!(got.len() == records.len(), "summaries contain duplicate ids");
    let missing: BTreeSet<usize> = expected.difference(&got).copied().collect();
    let extra: BTreeSet<usize> = got.difference(&expected).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        bail!(
            "summaries do not match the {} split: missing ids [{}]; unexpected ids [{}]",
            a.split,
            describe_ids(&missing),
            describe_ids(&extra)
        );
    }
    ensure!(!records.is_empty(), "the {} split is empty", a.split);
    let scores = records
        .iter()
        .map(|r| {
            score_example(r.id, &r.summary, &data.examples[r.id].summary, extractor.as_ref(), embedder.as_ref())
                .with_context(|| format!("scoring example {}", r.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ScoreReport::new(scores)?;
    write_output(&a.out_dir, SCORES_FILE, &report.to_csv()?)?;
    write_output(&a.out_dir, AGGREGATE_FILE, report.aggregate_json().as_bytes())?;
    write_output(&a.out_dir, SERIES_FILE, report.series_csv().as_bytes())?;
    print!("{}", report.render_text());
    Ok(())
}

fn parse_named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path
                .parent()
                .and_then(Path::file_name)
                .or_else(|| path.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (name, path)
        }
    }
}

pub fn report(a: ReportArgs) -> Result<()> {
    ensure!(a.scores.len() >= 2, "report needs at least two --scores files");
    let named: Vec<(String, PathBuf)> = a.scores.iter().map(|s| parse_named(s)).collect();
    for (_, p) in &named {
        require_file(p, "scores file")?;
    }
    let mut seen = BTreeSet::new();
    for (name, _) in &named {
        ensure!(seen.insert(name.as_str()), "model name `{name}` used twice");
    }
    let reports = named
        .into_iter()
        .map(|(name, path)| {
            let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let r = ScoreReport::from_csv(file).with_context(|| format!("reading {}", path.display()))?;
            Ok((name, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let comparison = Comparison::new(&reports)?;
    let text = comparison.render_text();
    write_output(&a.out_dir, COMPARISON_TEXT, text.as_bytes())?;
    write_output(&a.out_dir, COMPARISON_CSV, &comparison.to_csv()?)?;
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_accept_fractions_and_percentages() {
        assert_eq!(parse_ratios("0.7,0.15,0.15").unwrap(), [0.7, 0.15, 0.15]);
        let r = parse_ratios("70:15:15").unwrap();
        assert!((r[0] - 0.7).abs() < 1e-12 && (r[2] - 0.15).abs() < 1e-12);
        assert!(parse_ratios("1,2").is_err());
        assert!(parse_ratios("1,0,1").is_err());
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"batch_size": 4, "max_steps": 9}"#).unwrap();
        let flags = TrainingFlags {
            config: Some(path.clone()),
            max_steps: Some(3),
            ..TrainingFlags::default()
        };
        let c = resolve_config(TrainingConfig::default(), &flags).unwrap();
        assert_eq!((c.batch_size, c.max_steps), (4, 3));
        std::fs::write(&path, r#"{"batch_sz": 4}"#).unwrap();
        assert!(resolve_config(TrainingConfig::default(), &flags).is_err());
    }

    #[test]
    fn named_score_files() {
        assert_eq!(parse_named("a=x/scores.csv"), ("a".into(), PathBuf::from("x/scores.csv")));
        assert_eq!(parse_named("runs/news/scores.csv").0, "news");
    }
}
