mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Engagement span tagging: corpus tools, training and evaluation.
#[derive(Parser, Debug)]
#[command(name = "stancespan", version)]
pub struct Cli {
    /// Seed for fold assignment, training and search.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with "model", "train", "search" and "columns" sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Reject labels outside the scheme instead of setting them aside.
    #[arg(long, global = true)]
    pub strict_labels: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct CorpusArg {
    /// Corpus file (.jsonl, or .tsv for the column format).
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read a JSONL or TSV corpus, validate it and write normalized JSONL.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Map raw labels onto the ten experiment labels.
        #[arg(long)]
        collapse: bool,
    },
    /// Span counts per label.
    Stats {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        collapse: bool,
        #[arg(long)]
        json: bool,
    },
    /// Report spans that break annotation conventions.
    Audit {
        #[command(flatten)]
        corpus: CorpusArg,
        /// JSON list of rules; the built-in rules when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Write the five train/dev/test rotations as a JSON manifest.
    Folds {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Share of gold spans that the candidate suggester proposes.
    SuggestRecall {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        max_ngram: Option<usize>,
        #[arg(long)]
        no_subtrees: bool,
        /// Let n-grams run across sentence boundaries.
        #[arg(long)]
        cross_sentence: bool,
    },
    /// Train on one fold and save the best-dev checkpoint.
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        fold_manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Output directory for model.ckpt, train_log.jsonl and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Frozen token vectors for the external and dual encoders.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Cross-validate and print the mean/min summary.
    Cv {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Random hyperparameter search on one fold's train/dev split.
    Sweep {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        fold_manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Score predicted spans against gold spans.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Only use gold spans from this annotator.
        #[arg(long)]
        gold_annotator: Option<String>,
        /// Leave EMPTY out of the averaged scores.
        #[arg(long)]
        exclude_empty: bool,
        #[arg(long)]
        json: bool,
    },
    /// Agreement between two annotators of the same corpus.
    Agree {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        json: bool,
    },
    /// Tag a corpus with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArg,
        /// ansi, html or jsonl.
        #[arg(long, default_value = "ansi")]
        format: String,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A bad invocation that clap itself cannot see.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<stancespan::Error>() {
            return match e {
                stancespan::Error::NonFiniteLoss { .. } | stancespan::Error::NonFiniteGradient(_) => 3,
                stancespan::Error::Config(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
