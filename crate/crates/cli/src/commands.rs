//! Subcommand bodies. Each writes exactly one manifest on success.

use std::path::{Path, PathBuf};

use anyhow::Context;
use hitea::corpus::{
    corpus_fingerprint, generate_corpus, read_dataset, split_of, write_dataset, Split, VideoClip, Vocab,
};
use hitea::evaluation::{
    evaluate_task, inference_views, k_sweep_experiment, shuffle_test, KSweepRow, ShuffleReport, Task, TaskResult,
};
use hitea::model::{load_checkpoint, HiteaModel, ModelConfig};
use hitea::objectives::LossFlags;
use hitea::training::{finetune_retrieval, pretrain, TrainConfig, CHECKPOINT_FILE, HISTORY_FILE};
use serde::Serialize;

use crate::config::{self, usage, RunConfig};
use crate::manifest::RunManifest;
use crate::{Cli, Command, EvalArgs, FinetuneArgs, GenDataArgs, OptimArgs, TrainArgs};

pub const EVAL_REPORT_FILE: &str = "eval.report.json";

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.corpus.seed = seed;
        cfg.train.seed = seed;
    }
    match &cli.command {
        Command::GenData(args) => gen_data(cfg, args, &cli.out_dir),
        Command::Pretrain(args) => cmd_pretrain(cfg, args, &cli.out_dir),
        Command::Finetune(args) => cmd_finetune(cfg, args, &cli.out_dir),
        Command::Eval(args) => cmd_eval(cfg, args, &cli.out_dir),
    }
}

fn gen_data(mut cfg: RunConfig, args: &GenDataArgs, out_dir: &Path) -> anyhow::Result<()> {
    if let Some(n) = args.num_videos {
        cfg.corpus.num_videos = n;
    }
    if let Some(t) = args.frames_per_clip {
        cfg.corpus.frames_per_clip = t;
    }
    if let Some(f) = args.temporal_fraction {
        cfg.corpus.temporal_fraction = f;
    }
    let clips = generate_corpus(&cfg.corpus)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_dataset(&clips, &cfg.corpus.vocab, &args.out)?;
    let mut manifest = RunManifest::new("gen-data", &cfg);
    manifest.corpus_fingerprint = Some(corpus_fingerprint(&clips, &cfg.corpus.vocab)?);
    manifest.artifacts.push(args.out.clone());
    let path = manifest.write(out_dir)?;
    println!(
        "wrote {} clips to {} (manifest {})",
        clips.len(),
        args.out.display(),
        path.display()
    );
    Ok(())
}

struct Dataset {
    vocab: Vocab,
    clips: Vec<VideoClip>,
    fingerprint: String,
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    let (vocab, clips) = read_dataset(path)?;
    let fingerprint = corpus_fingerprint(&clips, &vocab)?;
    Ok(Dataset {
        vocab,
        clips,
        fingerprint,
    })
}

/// Rejects a model that cannot consume this dataset.
fn check_compatible(model: &ModelConfig, data: &Dataset) -> anyhow::Result<()> {
    if model.vocab_size != data.vocab.len() {
        return Err(usage(format!(
            "model vocabulary has {} tokens, dataset has {}",
            model.vocab_size,
            data.vocab.len()
        )));
    }
    if let Some(c) = data.clips.first() {
        let f = &c.frames;
        if (f.c, f.h, f.w) != (model.channels, model.frame_height, model.frame_width) {
            return Err(usage(format!(
                "model expects {}x{}x{} frames, dataset has {}x{}x{}",
                model.channels, model.frame_height, model.frame_width, f.c, f.h, f.w
            )));
        }
    }
    Ok(())
}

fn apply_optim(train: &mut TrainConfig, args: &OptimArgs) {
    if let Some(v) = args.epochs {
        train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = args.lr {
        train.peak_lr = v;
    }
    if let Some(v) = args.warmup_steps {
        train.warmup_steps = v;
    }
    if let Some(v) = args.queue_capacity {
        train.objectives.queue_capacity = v;
    }
}

fn training_manifest(name: &str, cfg: &RunConfig, data: &Dataset, out_dir: &Path) -> RunManifest {
    let mut manifest = RunManifest::new(name, cfg);
    manifest.corpus_fingerprint = Some(data.fingerprint.clone());
    manifest.checkpoint = Some(out_dir.join(CHECKPOINT_FILE));
    manifest.artifacts = vec![out_dir.join(CHECKPOINT_FILE), out_dir.join(HISTORY_FILE)];
    manifest
}

fn report_epochs(means: &[f64]) {
    for (i, m) in means.iter().enumerate() {
        println!("epoch {i}: mean loss {m:.4}");
    }
}

fn cmd_pretrain(mut cfg: RunConfig, args: &TrainArgs, out_dir: &Path) -> anyhow::Result<()> {
    apply_optim(&mut cfg.train, &args.optim);
    if let Some(l) = &args.losses {
        cfg.train.objectives.losses = LossFlags::parse(l)?;
    }
    if let Some(k) = args.k {
        cfg.train.objectives.k = k;
    }
    cfg.train.checkpoint_dir = Some(out_dir.to_path_buf());
    let data = load_data(&args.data)?;
    // The vocabulary size is a property of the dataset, not a free setting.
    cfg.model.vocab_size = data.vocab.len();
    check_compatible(&cfg.model, &data)?;
    let (_, history) = pretrain(&data.clips, &data.vocab, &cfg.model, &cfg.train)?;
    report_epochs(&history.epoch_means());
    let path = training_manifest("pretrain", &cfg, &data, out_dir).write(out_dir)?;
    println!(
        "checkpoint {} (manifest {})",
        out_dir.join(CHECKPOINT_FILE).display(),
        path.display()
    );
    Ok(())
}

fn cmd_finetune(mut cfg: RunConfig, args: &FinetuneArgs, out_dir: &Path) -> anyhow::Result<()> {
    apply_optim(&mut cfg.train, &args.optim);
    cfg.train.objectives.losses = LossFlags::RETRIEVAL;
    cfg.train.checkpoint_dir = Some(out_dir.to_path_buf());
    let data = load_data(&args.data)?;
    let model = load_checkpoint(&args.checkpoint)?;
    cfg.model = model.config().clone();
    check_compatible(&cfg.model, &data)?;
    let history = finetune_retrieval(&model, &data.clips, &data.vocab, &cfg.train)?;
    report_epochs(&history.epoch_means());
    let mut manifest = training_manifest("finetune", &cfg, &data, out_dir);
    manifest.artifacts.insert(0, args.checkpoint.clone());
    let path = manifest.write(out_dir)?;
    println!(
        "checkpoint {} (manifest {})",
        out_dir.join(CHECKPOINT_FILE).display(),
        path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    task: Task,
    split: Option<Split>,
    num_clips: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<TaskResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    shuffle: Option<ShuffleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_sweep: Option<Vec<KSweepRow>>,
}

fn parse_split(name: &str) -> anyhow::Result<Split> {
    match name {
        "temporal" => Ok(Split::Temporal),
        "static" => Ok(Split::Static),
        _ => Err(usage(format!("unknown split `{name}`; valid splits: temporal, static"))),
    }
}

fn cmd_eval(mut cfg: RunConfig, args: &EvalArgs, out_dir: &Path) -> anyhow::Result<()> {
    let task = Task::parse(&args.task)?;
    let split = args.split.as_deref().map(parse_split).transpose()?;
    if let Some(k) = args.rerank_k {
        cfg.eval.rerank_k = k;
    }
    if let Some(n) = args.num_shuffles {
        cfg.shuffle.num_shuffles = n;
    }
    if args.k_sweep.is_some() && task != Task::Retrieval {
        return Err(usage("--k-sweep reports retrieval; use --task retrieval"));
    }
    let data = load_data(&args.data)?;
    let eval_clips = match split {
        Some(s) => split_of(&data.clips, s),
        None => data.clips.clone(),
    };
    if eval_clips.is_empty() {
        return Err(usage("no clips to evaluate in the selected split"));
    }

    let mut out = EvalOutput {
        task,
        split,
        num_clips: eval_clips.len(),
        result: None,
        shuffle: None,
        k_sweep: None,
    };
    let mut checkpoint: Option<PathBuf> = None;
    if let Some(ks) = &args.k_sweep {
        cfg.model.vocab_size = data.vocab.len();
        check_compatible(&cfg.model, &data)?;
        let rows = k_sweep_experiment(
            &data.clips,
            &data.vocab,
            &cfg.model,
            &cfg.train,
            &eval_clips,
            ks,
            &cfg.eval,
        )?;
        for row in &rows {
            println!("K={}: mean recall {:.2}", row.k, row.retrieval.mean_recall);
        }
        out.k_sweep = Some(rows);
    } else {
        let path = args
            .checkpoint
            .as_ref()
            .ok_or_else(|| usage("--checkpoint is required unless --k-sweep is given"))?;
        let model = load_checkpoint(path)?;
        cfg.model = model.config().clone();
        check_compatible(&cfg.model, &data)?;
        checkpoint = Some(path.clone());
        if args.shuffle_test {
            let report = run_shuffle(&model, &eval_clips, &data.vocab, task, &cfg)?;
            println!(
                "{}: ordered {:.2}, shuffled {:.2}, gap {:.2}",
                report.metric_name, report.original, report.shuffled, report.gap
            );
            out.shuffle = Some(report);
        }
        let videos = inference_views(&eval_clips, cfg.model.frames);
        let result = evaluate_task(&model, task, &eval_clips, &videos, &data.vocab, &cfg.eval)?;
        println!("{}: {:.2}", result.metric_name, result.value);
        out.result = Some(result);
    }

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let report_path = out_dir.join(EVAL_REPORT_FILE);
    std::fs::write(&report_path, serde_json::to_vec_pretty(&out)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    let mut manifest = RunManifest::new("eval", &cfg);
    manifest.corpus_fingerprint = Some(data.fingerprint);
    manifest.checkpoint = checkpoint;
    manifest.artifacts.push(report_path);
    manifest.write(out_dir)?;
    Ok(())
}

fn run_shuffle(
    model: &HiteaModel,
    clips: &[VideoClip],
    vocab: &Vocab,
    task: Task,
    cfg: &RunConfig,
) -> anyhow::Result<ShuffleReport> {
    Ok(shuffle_test(
        model,
        clips,
        vocab,
        task,
        &cfg.eval,
        cfg.shuffle.seed,
        cfg.shuffle.num_shuffles,
    )?)
}
