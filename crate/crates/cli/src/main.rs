//! `spoofwatch`: corpus generation, training, evaluation, embedding export
//! and continual-learning cycles.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spoofwatch::continual::CycleMode;
use spoofwatch::corpus::Split;

use crate::config::{usage, UsageError};

#[derive(Parser)]
#[command(
    name = "spoofwatch",
    version,
    about = "Synthetic-speech detection experiments"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Plugin, pseudo-labeling and fine-tuning.
    Ours,
    /// Direct fine-tuning on the labeled seed.
    Supervised,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a JSON corpus spec.
    Corpus { spec: PathBuf },
    /// Train a model from an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the checkpoint and log in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Score a manifest split and write scores and a metrics report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "eval")]
        split: Split,
        /// Output directory (default: the checkpoint's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Export clip embeddings as CSV.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "eval")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one continual-learning cycle on the pool split.
    Continual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Starting checkpoint (default: model.ckpt in the output directory).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Corpus { spec } => commands::corpus(&spec),
        Command::Train { config, resume } => commands::train(&config, resume),
        Command::Eval {
            checkpoint,
            manifest,
            split,
            out,
            threshold,
        } => commands::eval(&checkpoint, &manifest, split, out, threshold),
        Command::Embed {
            checkpoint,
            manifest,
            split,
            out,
        } => commands::embed(&checkpoint, &manifest, split, &out),
        Command::Continual {
            config,
            mode,
            checkpoint,
        } => {
            let mode = match mode {
                Mode::Ours => CycleMode::Ours,
                Mode::Supervised => CycleMode::Supervised,
            };
            commands::continual(&config, mode, checkpoint)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
