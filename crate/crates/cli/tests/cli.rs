use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pgsum_core::corpus::{write_jsonl, RawExample, SplitManifest};
use pgsum_core::metrics::{Comparison, ScoreReport};
use pgsum_core::synthetic::{distinct_meeting_pairs, meeting_like, news_like};

fn pgsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgsum")).args(args).output().expect("run pgsum")
}

fn ok(args: &[&str]) -> String {
    let out = pgsum(args);
    assert!(
        out.status.success(),
        "pgsum {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = pgsum(args);
    assert!(!out.status.success(), "pgsum {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv(path: &Path, rows: &[RawExample]) {
    let mut text = String::from("article,summary\n");
    for r in rows {
        text.push_str(&format!("\"{}\",\"{}\"\n", r.article.replace('"', "\"\""), r.summary.replace('"', "\"\"")));
    }
    std::fs::write(path, text).unwrap();
}

fn write_corpus_jsonl(path: &Path, rows: &[RawExample]) {
    let mut buf = Vec::new();
    write_jsonl(rows, &mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_splits_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("news.csv");
    write_csv(&input, &news_like(142, 3));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["preprocess", "--input", s(&input), "--ratios", "70:15:15", "--seed", "7", "--vocab-size", "300", "--out-dir", s(out)]);
    }
    assert_eq!(read_all(&a), read_all(&b));
    let m: SplitManifest = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((m.train.len(), m.validation.len(), m.test.len()), (99, 21, 22));
    assert!(!dir.path().join("a").join("corpus.jsonl.partial").exists());
}

#[test]
fn preprocess_reports_missing_fields_and_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    std::fs::write(&input, "article,abstract\n\"a, b\",c\n").unwrap();
    let err = fails(&["preprocess", "--input", s(&input), "--out-dir", s(dir.path())]);
    assert!(err.contains("summary"), "{err}");

    let jsonl = dir.path().join("x.jsonl");
    std::fs::write(&jsonl, "{\"article\": \"a\", \"summary\": \"b\"}\nnot json\n").unwrap();
    let err = fails(&["preprocess", "--input", s(&jsonl), "--format", "jsonl", "--out-dir", s(dir.path())]);
    assert!(err.contains('2'), "{err}");

    let err = fails(&["preprocess", "--input", s(&dir.path().join("nope.csv")), "--out-dir", s(dir.path())]);
    assert!(err.contains("does not exist"), "{err}");
}

struct Trained {
    _dir: tempfile::TempDir,
    data: PathBuf,
    model: PathBuf,
    root: PathBuf,
}

fn tiny_model() -> Trained {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.jsonl");
    write_corpus_jsonl(&input, &meeting_like(20, 4));
    let data = dir.path().join("data");
    ok(&["preprocess", "--input", s(&input), "--format", "jsonl", "--seed", "1", "--out-dir", s(&data)]);
    let model = dir.path().join("model");
    let out = ok(&[
        "train", "--data", s(&data), "--max-steps", "20", "--batch-size", "4", "--validate-every", "5", "--emb-dim", "8",
        "--hidden-dim", "8", "--out-dir", s(&model),
    ]);
    assert!(out.contains("final validation loss"), "{out}");
    let root = dir.path().to_path_buf();
    Trained {
        _dir: dir,
        data,
        model,
        root,
    }
}

#[test]
fn train_writes_checkpoint_curve_and_vocab() {
    let t = tiny_model();
    for f in ["checkpoint.pgnc", "loss_curve.csv", "vocab.txt"] {
        assert!(t.model.join(f).is_file(), "{f}");
    }
    let curve = std::fs::read_to_string(t.model.join("loss_curve.csv")).unwrap();
    assert!(curve.starts_with("step,loss,val_loss\n"));
    assert_eq!(curve.lines().count(), 21);

    // Same flags and seed reproduce the run byte for byte.
    let again = t.root.join("again");
    ok(&[
        "train", "--data", s(&t.data), "--max-steps", "20", "--batch-size", "4", "--validate-every", "5", "--emb-dim",
        "8", "--hidden-dim", "8", "--out-dir", s(&again),
    ]);
    assert_eq!(read_all(&t.model), read_all(&again));
}

#[test]
fn zero_step_finetune_copies_the_checkpoint() {
    let t = tiny_model();
    let ft = t.root.join("ft");
    ok(&["finetune", "--checkpoint", s(&t.model.join("checkpoint.pgnc")), "--data", s(&t.data), "--max-steps", "0", "--out-dir", s(&ft)]);
    assert_eq!(
        std::fs::read(t.model.join("checkpoint.pgnc")).unwrap(),
        std::fs::read(ft.join("checkpoint.pgnc")).unwrap()
    );
}

#[test]
fn finetune_and_decode_refuse_a_foreign_vocabulary() {
    let t = tiny_model();
    let other_input = t.root.join("n.jsonl");
    write_corpus_jsonl(&other_input, &news_like(20, 9));
    let other = t.root.join("other");
    ok(&["preprocess", "--input", s(&other_input), "--format", "jsonl", "--out-dir", s(&other)]);
    let ckpt = t.model.join("checkpoint.pgnc");
    let foreign = other.join("vocab.txt");
    let err = fails(&["finetune", "--checkpoint", s(&ckpt), "--data", s(&other), "--vocab", s(&foreign), "--out-dir", s(&t.root.join("x"))]);
    assert!(err.contains("vocabulary"), "{err}");
    let err = fails(&["decode", "--checkpoint", s(&ckpt), "--data", s(&other), "--vocab", s(&foreign), "--out-dir", s(&t.root.join("y"))]);
    assert!(err.contains("vocabulary"), "{err}");
    assert!(!t.root.join("y").exists());

    // Re-encoding the other corpus with the model's vocabulary makes it usable.
    let reenc = t.root.join("reenc");
    ok(&["preprocess", "--input", s(&other_input), "--format", "jsonl", "--vocab", s(&t.model.join("vocab.txt")), "--out-dir", s(&reenc)]);
    ok(&["finetune", "--checkpoint", s(&ckpt), "--data", s(&reenc), "--max-steps", "3", "--out-dir", s(&t.root.join("ft"))]);
}

#[test]
fn beam_of_one_equals_greedy_and_decoding_is_deterministic() {
    let t = tiny_model();
    let ckpt = t.model.join("checkpoint.pgnc");
    let run = |name: &str, extra: &[&str]| {
        let out = t.root.join(name);
        let mut args = vec!["decode", "--checkpoint", s(&ckpt), "--data", s(&t.data), "--max-len", "12", "--min-len", "2"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out-dir", s(&out)]);
        ok(&args);
        std::fs::read_to_string(out.join("summaries.jsonl")).unwrap()
    };
    let greedy = run("g", &["--greedy"]);
    assert_eq!(greedy, run("b1", &["--beam-size", "1"]));
    assert_eq!(run("b4", &["--beam-size", "4"]), run("b4again", &["--beam-size", "4"]));
    let first: serde_json::Value = serde_json::from_str(greedy.lines().next().unwrap()).unwrap();
    for key in ["id", "summary", "origin_tags", "mean_logprob"] {
        assert!(first.get(key).is_some(), "{key}");
    }
}

fn references_as_summaries(data: &Path, split: &str, blank: bool) -> String {
    let corpus = std::fs::read_to_string(data.join("corpus.jsonl")).unwrap();
    let rows: Vec<RawExample> = corpus.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let m: SplitManifest = serde_json::from_slice(&std::fs::read(data.join("manifest.json")).unwrap()).unwrap();
    m.split(split)
        .unwrap()
        .iter()
        .map(|&id| {
            let summary = if blank { String::new() } else { rows[id].summary.clone() };
            serde_json::json!({"id": id, "summary": summary, "origin_tags": [], "mean_logprob": 0.0}).to_string() + "\n"
        })
        .collect()
}

#[test]
fn evaluate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.jsonl");
    write_corpus_jsonl(&input, &meeting_like(40, 5));
    let data = dir.path().join("data");
    ok(&["preprocess", "--input", s(&input), "--format", "jsonl", "--out-dir", s(&data)]);

    let perfect = dir.path().join("perfect.jsonl");
    std::fs::write(&perfect, references_as_summaries(&data, "test", false)).unwrap();
    let out_a = dir.path().join("eval_a");
    let table = ok(&["evaluate", "--summaries", s(&perfect), "--data", s(&data), "--out-dir", s(&out_a)]);
    assert!(table.contains("100.00"), "{table}");
    let agg: serde_json::Value = serde_json::from_slice(&std::fs::read(out_a.join("aggregate.json")).unwrap()).unwrap();
    for metric in ["rouge2_f1", "fact_f1"] {
        let row = agg[metric].as_object().unwrap();
        assert_eq!(row.keys().collect::<Vec<_>>(), ["max", "mean", "median", "min"]);
        assert!(row.values().all(|v| v.as_f64() == Some(1.0)), "{metric}: {row:?}");
    }
    let series = std::fs::read_to_string(out_a.join("series.csv")).unwrap();
    assert!(series.starts_with("metric,index,id,value,median\n"));

    let blank = dir.path().join("blank.jsonl");
    std::fs::write(&blank, references_as_summaries(&data, "test", true)).unwrap();
    let out_b = dir.path().join("eval_b");
    ok(&["evaluate", "--summaries", s(&blank), "--data", s(&data), "--out-dir", s(&out_b)]);
    let scores = ScoreReport::from_csv(std::fs::File::open(out_b.join("scores.csv")).unwrap()).unwrap();
    assert!(scores.examples.iter().all(|e| e.fact_f1 == 0.0));

    let partial = dir.path().join("partial.jsonl");
    let text = references_as_summaries(&data, "test", false);
    std::fs::write(&partial, text.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let err = fails(&["evaluate", "--summaries", s(&partial), "--data", s(&data), "--out-dir", s(&dir.path().join("e"))]);
    assert!(err.contains("missing ids"), "{err}");

    let a = format!("same={}", s(&out_a.join("scores.csv")));
    let b = format!("copy={}", s(&out_a.join("scores.csv")));
    let c = format!("blank={}", s(&out_b.join("scores.csv")));
    let rep = dir.path().join("rep");
    let text = ok(&["report", "--scores", &a, "--scores", &b, "--scores", &c, "--out-dir", s(&rep)]);
    assert!(text.contains("same") && text.contains("blank"));
    let cmp = Comparison::from_csv(std::fs::File::open(rep.join("comparison.csv")).unwrap()).unwrap();
    assert!(cmp.rows.iter().filter(|r| r.section == "delta" && r.model == "copy").all(|r| r.value == 0.0));
    assert!(cmp.rows.iter().any(|r| r.section == "delta" && r.model == "blank" && r.value < 0.0));
    let again = Comparison::from_csv(&cmp.to_csv().unwrap()[..]).unwrap();
    assert_eq!(again, cmp);
    assert_eq!(std::fs::read_to_string(rep.join("comparison.txt")).unwrap(), text);
}

#[test]
fn overfit_checkpoint_reproduces_its_references() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.jsonl");
    let pairs = distinct_meeting_pairs(8, 0);
    write_corpus_jsonl(&input, &pairs);
    let data = dir.path().join("data");
    ok(&["preprocess", "--input", s(&input), "--format", "jsonl", "--out-dir", s(&data)]);
    // Train and score on all eight pairs.
    let all: Vec<usize> = (0..8).collect();
    let manifest = serde_json::json!({"seed": 0, "ratios": [0.7, 0.15, 0.15], "train": all, "validation": all, "test": all});
    std::fs::write(data.join("manifest.json"), manifest.to_string()).unwrap();
    let model = dir.path().join("model");
    ok(&[
        "train", "--data", s(&data), "--max-steps", "1500", "--batch-size", "8", "--emb-dim", "16", "--hidden-dim", "32",
        "--out-dir", s(&model),
    ]);
    let out = dir.path().join("dec");
    ok(&[
        "decode", "--checkpoint", s(&model.join("checkpoint.pgnc")), "--data", s(&data), "--split", "train", "--greedy",
        "--min-len", "1", "--max-len", "30", "--out-dir", s(&out),
    ]);
    let text = std::fs::read_to_string(out.join("summaries.jsonl")).unwrap();
    let exact = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| {
            let id = v["id"].as_u64().unwrap() as usize;
            let want = pgsum_core::corpus::tokenize(&pairs[id].summary).join(" ");
            v["summary"].as_str().unwrap() == want
        })
        .count();
    assert!(exact >= 6, "{exact}/8 exact");
}
