//! `hitea`: corpus generation, pre-training, fine-tuning and evaluation.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 1 on any
//! other failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "hitea",
    version,
    about = "Hierarchical temporal-aware video-language pre-training"
)]
pub struct Cli {
    /// TOML file layered over the built-in defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for corpus generation and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for checkpoints, reports and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic moving-shapes corpus.
    GenData(GenDataArgs),
    /// Pre-train a model from scratch.
    Pretrain(TrainArgs),
    /// Fine-tune a checkpoint for retrieval with the contrastive and matching losses.
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on a downstream task.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output dataset path (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub num_videos: Option<usize>,
    #[arg(long)]
    pub frames_per_clip: Option<usize>,
    #[arg(long)]
    pub temporal_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    #[arg(long)]
    pub queue_capacity: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated objectives; `base` expands to vtc,vtm,mlm,prefix_lm.
    #[arg(long)]
    pub losses: Option<String>,
    /// Positive words mined per caption.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub optim: OptimArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Required unless `--k-sweep` is given.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// retrieval, mcqa, openqa or caption.
    #[arg(long, default_value = "retrieval")]
    pub task: String,
    /// Restrict evaluation to one split: temporal or static.
    #[arg(long)]
    pub split: Option<String>,
    /// Also score frame-shuffled inputs and report the gap.
    #[arg(long)]
    pub shuffle_test: bool,
    #[arg(long)]
    pub num_shuffles: Option<usize>,
    /// Pre-train one model per listed K and report retrieval for each.
    #[arg(long, value_delimiter = ',')]
    pub k_sweep: Option<Vec<usize>>,
    #[arg(long)]
    pub rerank_k: Option<usize>,
}

fn main() -> ExitCode {
    if std::env::var("HITEA_DETERMINISTIC").is_ok_and(|v| v == "1") {
        // Must precede the first tensor op, which sizes the thread pool.
        std::env::set_var("RAYON_NUM_THREADS", "1");
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<hitea::Error>() {
        Some(err) if err.is_usage() => 2,
        _ => 1,
    }
}
