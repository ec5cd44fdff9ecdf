//! Optimisation loops for pre-training and retrieval fine-tuning.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::backprop::GradStore;
use candle_core::{DType, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, HiteaModel, ModelConfig};
use crate::objectives::{total_loss, Batch, LossBundle, LossFlags, NegativeQueue, ObjectiveConfig};
use crate::rng::{derived_rng, stream};
use crate::views::ViewConfig;

pub const CHECKPOINT_FILE: &str = "model.safetensors";
pub const HISTORY_FILE: &str = "history.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub betas: [f64; 2],
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
    pub seed: u64,
    /// Steps between evaluation callbacks; 0 disables them.
    pub eval_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub views: ViewConfig,
    pub objectives: ObjectiveConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // Large-scale recipe for reference: 10 epochs, lr 5e-5 after warmup,
        // weight decay 0.02. These defaults are sized for a CPU.
        TrainConfig {
            batch_size: 16,
            epochs: 5,
            peak_lr: 1e-3,
            warmup_steps: 20,
            weight_decay: 0.02,
            betas: [0.9, 0.98],
            grad_clip: 1.0,
            seed: 0,
            eval_every: 0,
            checkpoint_dir: None,
            views: ViewConfig::default(),
            objectives: ObjectiveConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Defaults for retrieval fine-tuning: only the contrastive and matching losses.
    pub fn finetune_default() -> Self {
        TrainConfig {
            objectives: ObjectiveConfig {
                losses: LossFlags::RETRIEVAL,
                ..ObjectiveConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.views.validate()?;
        self.objectives.validate()?;
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.batch_size < 2 && self.objectives.losses.needs_pairs() {
            return Err(Error::config(
                "batch_size",
                "must be at least 2 with vtc or vtm enabled",
            ));
        }
        if self.warmup_steps < 1 {
            return Err(Error::config("warmup_steps", "must be at least 1"));
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::config("peak_lr", "must be positive"));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::config("betas", "must lie in [0, 1)"));
        }
        if self.grad_clip.is_nan() || self.grad_clip < 0.0 {
            return Err(Error::config("grad_clip", "must be non-negative"));
        }
        Ok(())
    }

    /// Optimisation steps per epoch over `n` clips; a trailing batch too
    /// small for the pairwise losses is dropped.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        let full = n / self.batch_size;
        let rest = n % self.batch_size;
        let min = if self.objectives.losses.needs_pairs() { 2 } else { 1 };
        full + usize::from(rest >= min)
    }
}

/// Linear warmup from 0 to `peak_lr`, then cosine decay reaching 0 at `total_steps`.
pub fn lr_schedule(step: usize, config: &TrainConfig, total_steps: usize) -> f64 {
    let w = config.warmup_steps;
    if step < w {
        return config.peak_lr * step as f64 / w as f64;
    }
    if step >= total_steps {
        return 0.0;
    }
    let progress = (step - w) as f64 / (total_steps - w) as f64;
    config.peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub losses: LossBundle,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSnapshot {
    pub step: usize,
    pub metrics: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalSnapshot>,
}

impl TrainHistory {
    /// Mean total loss per epoch, in epoch order.
    pub fn epoch_means(&self) -> Vec<f64> {
        let epochs = self.steps.iter().map(|s| s.epoch + 1).max().unwrap_or(0);
        (0..epochs)
            .map(|e| {
                let v: Vec<f64> = self
                    .steps
                    .iter()
                    .filter(|s| s.epoch == e)
                    .map(|s| s.losses.total)
                    .collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect()
    }
}

type EvalHook<'a> = dyn FnMut(&HiteaModel, usize) -> Result<serde_json::Value> + 'a;

fn global_norm(vars: &[Var], grads: &GradStore) -> Result<f64> {
    let mut sq = 0.0;
    for v in vars {
        if let Some(g) = grads.get(v.as_tensor()) {
            sq += g.to_dtype(DType::F64)?.sqr()?.sum_all()?.to_scalar::<f64>()?;
        }
    }
    Ok(sq.sqrt())
}

fn append_jsonl(path: &Path, record: &impl Serialize) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(record)?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Trains `model` in place on `clips`.
///
/// Clip order is reshuffled every epoch; each step draws its views and loss
/// randomness from its own sub-seed, so runs are reproducible from `seed`.
/// When `checkpoint_dir` is set the model is saved there before training and
/// after every epoch, and step records are appended to the history file.
pub fn train(
    model: &HiteaModel,
    clips: &[VideoClip],
    vocab: &Vocab,
    config: &TrainConfig,
    mut eval_hook: Option<&mut EvalHook<'_>>,
) -> Result<TrainHistory> {
    config.validate()?;
    if clips.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    let steps_per_epoch = config.steps_per_epoch(clips.len());
    let total_steps = steps_per_epoch * config.epochs;
    let vars = model.params().all_vars();
    let mut opt = AdamW::new(
        vars.clone(),
        ParamsAdamW {
            lr: 0.0,
            beta1: config.betas[0],
            beta2: config.betas[1],
            eps: 1e-8,
            weight_decay: config.weight_decay,
        },
    )?;
    let mut queue = NegativeQueue::new(config.objectives.queue_capacity);
    let mut history = TrainHistory::default();
    let ckpt_dir = config.checkpoint_dir.as_deref();
    let history_path = ckpt_dir.map(|d| d.join(HISTORY_FILE));
    if let Some(dir) = ckpt_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hp = dir.join(HISTORY_FILE);
        std::fs::write(&hp, b"").map_err(|e| Error::io(&hp, e))?;
        save_checkpoint(model, &dir.join(CHECKPOINT_FILE))?;
    }

    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..clips.len()).collect();
        order.shuffle(&mut derived_rng(config.seed, stream::TRAIN, epoch as u64));
        for chunk in order.chunks(config.batch_size).take(steps_per_epoch) {
            let started = Instant::now();
            let mut rng = derived_rng(config.seed, stream::TRAIN, (1 << 32) + step as u64);
            let items: Vec<&VideoClip> = chunk.iter().map(|&i| &clips[i]).collect();
            let batch = Batch::from_clips(&items, vocab, &config.views, &mut rng)?;
            let out = total_loss(model, &batch, &config.objectives, &mut queue, &mut rng)?;
            if let Some(term) = out.bundle.non_finite_term() {
                return Err(Error::NonFinite {
                    term: term.to_string(),
                    step,
                });
            }
            let mut grads = out.total.backward()?;
            let grad_norm = global_norm(&vars, &grads)?;
            if config.grad_clip > 0.0 && grad_norm > config.grad_clip {
                let scale = config.grad_clip / grad_norm;
                for v in &vars {
                    if let Some(g) = grads.remove(v.as_tensor()) {
                        grads.insert(v.as_tensor(), (g * scale)?);
                    }
                }
            }
            let lr = lr_schedule(step + 1, config, total_steps);
            opt.set_learning_rate(lr);
            opt.step(&grads)?;
            let record = StepRecord {
                step,
                epoch,
                lr,
                losses: out.bundle,
                grad_norm,
                seconds: started.elapsed().as_secs_f64(),
            };
            if let Some(p) = &history_path {
                append_jsonl(p, &record)?;
            }
            history.steps.push(record);
            step += 1;
            if config.eval_every > 0 && step % config.eval_every == 0 {
                if let Some(hook) = eval_hook.as_mut() {
                    history.evals.push(EvalSnapshot {
                        step,
                        metrics: hook(model, step)?,
                    });
                }
            }
        }
        if let Some(dir) = ckpt_dir {
            save_checkpoint(model, &dir.join(CHECKPOINT_FILE))?;
        }
    }
    Ok(history)
}

/// Builds a fresh model from `model_config` and trains it with every enabled objective.
pub fn pretrain(
    clips: &[VideoClip],
    vocab: &Vocab,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<(HiteaModel, TrainHistory)> {
    config.validate()?;
    if model_config.vocab_size != vocab.len() {
        return Err(Error::config(
            "vocab_size",
            format!(
                "model expects {} tokens, corpus vocabulary has {}",
                model_config.vocab_size,
                vocab.len()
            ),
        ));
    }
    let model = HiteaModel::new(model_config.clone(), DType::F32, config.seed)?;
    model.set_temperatures(config.objectives.tau_init)?;
    let history = train(&model, clips, vocab, config, None)?;
    Ok((model, history))
}

/// Continues training `model` with the contrastive and matching losses only.
pub fn finetune_retrieval(
    model: &HiteaModel,
    clips: &[VideoClip],
    vocab: &Vocab,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if config.objectives.losses != LossFlags::RETRIEVAL {
        return Err(Error::config(
            "losses",
            format!(
                "retrieval fine-tuning uses exactly vtc and vtm, got {}",
                config.objectives.losses.enabled().join(",")
            ),
        ));
    }
    train(model, clips, vocab, config, None)
}
