//! `pgsum`: batch front end for preprocessing corpora, training and
//! fine-tuning summarizers, decoding, and scoring.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "pgsum", version, about = "Pointer-generator summarization toolkit")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a CSV or JSON-lines corpus, split it and build a vocabulary.
    Preprocess(PreprocessArgs),
    /// Train a model from scratch on a preprocessed corpus.
    Train(TrainArgs),
    /// Continue training a checkpoint on another corpus.
    Finetune(FinetuneArgs),
    /// Generate summaries for one split of a corpus.
    Decode(DecodeArgs),
    /// Score generated summaries against the corpus references.
    Evaluate(EvaluateArgs),
    /// Compare the score files of two or more models.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `csv` or `jsonl`.
    #[arg(long, default_value = "csv")]
    pub format: String,
    #[arg(long, default_value = "article")]
    pub article_field: String,
    #[arg(long, default_value = "summary")]
    pub summary_field: String,
    /// Vocabulary size including the four reserved tokens.
    #[arg(long, default_value_t = 50_000)]
    pub vocab_size: usize,
    /// Reuse an existing vocabulary file instead of building one.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Training settings; unset flags fall back to `--config`, then to defaults.
#[derive(Args, Debug, Default)]
pub struct TrainingFlags {
    /// JSON file with training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Fraction of the run trained with coverage.
    #[arg(long)]
    pub coverage_frac: Option<f64>,
    /// Weight of the coverage loss.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub validate_every: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    /// Vocabulary to encode with (default: the one in `--data`).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub emb_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden_dim: usize,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// The vocabulary the checkpoint was trained with (default: next to the checkpoint).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Vocabulary of the checkpoint (default: next to the checkpoint).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// `train`, `validation` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = pgsum_core::decoding::DEFAULT_BEAM_SIZE)]
    pub beam_size: usize,
    /// Greedy search instead of beam search.
    #[arg(long, conflicts_with = "beam_size")]
    pub greedy: bool,
    #[arg(long, default_value_t = pgsum_core::decoding::DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = pgsum_core::decoding::DEFAULT_MIN_LEN)]
    pub min_len: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// JSON-lines file written by `decode`.
    #[arg(long)]
    pub summaries: PathBuf,
    /// Preprocessed corpus holding the references.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// `builtin` or `exec:PATH`.
    #[arg(long, default_value = "builtin")]
    pub extractor: String,
    /// `hashed` or `exec:PATH`.
    #[arg(long, default_value = "hashed")]
    pub embedder: String,
    /// Width of fact embeddings.
    #[arg(long, default_value_t = pgsum_core::metrics::DEFAULT_EMBEDDING_WIDTH)]
    pub embedding_width: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `NAME=PATH` of a scores CSV; repeat for each model.
    #[arg(long = "scores", required = true, num_args = 1)]
    pub scores: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Finetune(a) => commands::finetune(a),
        Command::Decode(a) => commands::decode(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Report(a) => commands::report(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
