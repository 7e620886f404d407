//! `neamer`: command-line pipeline over the idiomaticity workbench.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neamer_core::corpus::{Language, Split};

/// Bad input that is not an I/O failure.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleMode {
    /// Mean of p_nonidiomatic over all checkpoints.
    Mean,
    /// Majority vote over all checkpoints.
    Vote,
    /// Mean over the k best checkpoints per language.
    Topk,
    /// Majority vote over the k best checkpoints per language.
    TopkVote,
}

#[derive(Debug, Parser)]
#[command(name = "neamer", version, about = "Idiomaticity detection pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, env = "NEAMER_CONFIG")]
    pub config: Option<PathBuf>,
    /// Dataset split (zero_shot_train, one_shot_train, validation, test).
    #[arg(long, global = true)]
    pub split: Option<Split>,
    /// Restrict to one language (EN, PT, GL).
    #[arg(long, global = true)]
    pub language: Option<Language>,
    /// Train a single seed instead of the configured schedule.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the configured epoch count.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<EnsembleMode>,
    /// Checkpoints per language for top-k ensembling.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Append a generation timestamp to text reports.
    #[arg(long, global = true)]
    pub stamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset CSV and write the accepted rows plus a rejection report.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compute locality feature vectors as JSONL.
    Features {
        #[arg(long)]
        input: Option<PathBuf>,
        /// NER span JSONL for the same split.
        #[arg(long)]
        ner: Option<PathBuf>,
    },
    /// Per-feature label counts.
    Stats {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        ner: Option<PathBuf>,
    },
    /// Train the baseline classifier under the seed and retry schedule.
    Train {
        /// Training CSV; defaults to the configured path for --split.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Validation CSV; defaults to the configured validation path.
        #[arg(long)]
        valid: Option<PathBuf>,
    },
    /// Score predictions against gold labels.
    Eval {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Score JSONL; several models are combined with --strategy.
        #[arg(long, conflicts_with = "predictions")]
        scores: Vec<PathBuf>,
        /// Combined prediction JSONL.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        ner: Option<PathBuf>,
        /// Precomputed feature JSONL instead of --ner.
        #[arg(long, conflicts_with = "ner")]
        features: Option<PathBuf>,
    },
    /// Combine checkpoint scores into one prediction per sample.
    Ensemble {
        #[arg(long, required = true)]
        scores: Vec<PathBuf>,
        /// Checkpoint metadata JSON array, needed for top-k.
        #[arg(long)]
        metas: Option<PathBuf>,
    },
    /// Samples on which two prediction files differ in correctness.
    Diff {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        ner: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.is::<std::io::Error>() || cause.downcast_ref::<csv::Error>().is_some_and(|e| e.is_io_error())
    });
    if io {
        2
    } else {
        1
    }
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
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
