//! Retrieval as a function of the number of mined positive words.

use serde::{Deserialize, Serialize};

use super::{evaluate_task, inference_views, EvalConfig, RetrievalReport, Task};
use crate::corpus::{VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::{pretrain, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub retrieval: RetrievalReport,
    pub final_epoch_loss: f64,
}

/// Pre-trains one model per K with identical corpus, seeds and settings
/// otherwise, and evaluates retrieval on `eval_clips`.
pub fn k_sweep_experiment(
    clips: &[VideoClip],
    vocab: &Vocab,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    eval_clips: &[VideoClip],
    ks: &[usize],
    eval_config: &EvalConfig,
) -> Result<Vec<KSweepRow>> {
    if ks.is_empty() {
        return Err(Error::config("k_sweep", "no K values"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(Error::config("k_sweep", format!("K must be at least 1, got {k}")));
    }
    ks.iter()
        .map(|&k| {
            let mut cfg = train_config.clone();
            cfg.objectives.k = k;
            let (model, history) = pretrain(clips, vocab, model_config, &cfg)?;
            let videos = inference_views(eval_clips, model_config.frames);
            let result = evaluate_task(&model, Task::Retrieval, eval_clips, &videos, vocab, eval_config)?;
            Ok(KSweepRow {
                k,
                retrieval: result.retrieval.expect("retrieval task"),
                final_epoch_loss: history.epoch_means().last().copied().unwrap_or(f64::NAN),
            })
        })
        .collect()
}
