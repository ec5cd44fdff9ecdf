//! Ordered-versus-shuffled frame probe for temporal reliance.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{build_mcqa_items, build_openqa_items, caption_eval, inference_views, mcqa_eval, openqa_eval, retrieve};
use super::{EvalConfig, RetrievalReport};
use crate::corpus::{tokenize, Frames, VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::HiteaModel;
use crate::rng::{derived_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Retrieval,
    Mcqa,
    Openqa,
    Caption,
}

impl Task {
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Retrieval => "mean_recall",
            Task::Mcqa | Task::Openqa => "accuracy",
            Task::Caption => "template_match",
        }
    }

    pub fn parse(name: &str) -> Result<Task> {
        match name {
            "retrieval" => Ok(Task::Retrieval),
            "mcqa" => Ok(Task::Mcqa),
            "openqa" => Ok(Task::Openqa),
            "caption" => Ok(Task::Caption),
            _ => Err(Error::config(
                "task",
                format!("unknown task `{name}`; valid tasks: retrieval, mcqa, openqa, caption"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: Task,
    pub metric_name: String,
    pub value: f64,
    pub retrieval: Option<RetrievalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleReport {
    pub task: Task,
    pub metric_name: String,
    pub original: f64,
    pub shuffled: f64,
    pub gap: f64,
    pub num_shuffles: usize,
    pub shuffle_seed: u64,
    /// Metric under each repetition, averaged into `shuffled`.
    pub per_shuffle: Vec<f64>,
}

/// Scores `task` on `clips` using the given frame stacks (one per clip).
pub fn evaluate_task(
    model: &HiteaModel,
    task: Task,
    clips: &[VideoClip],
    videos: &[Frames],
    vocab: &Vocab,
    config: &EvalConfig,
) -> Result<TaskResult> {
    config.validate()?;
    if clips.len() != videos.len() {
        return Err(Error::contract("one frame stack per clip is required"));
    }
    let (value, retrieval) = match task {
        Task::Retrieval => {
            let texts = clips
                .iter()
                .map(|c| tokenize(&c.caption, vocab))
                .collect::<Result<Vec<_>>>()?;
            let r = retrieve(model, videos, &texts, config)?;
            (r.mean_recall, Some(r))
        }
        Task::Mcqa => {
            let items = build_mcqa_items(clips, config.num_candidates, config.item_seed)?;
            (mcqa_eval(model, videos, &items, vocab, config)?, None)
        }
        Task::Openqa => (
            openqa_eval(model, videos, &build_openqa_items(clips), vocab, config)?,
            None,
        ),
        Task::Caption => (caption_eval(model, videos, clips, vocab, config)?, None),
    };
    Ok(TaskResult {
        task,
        metric_name: task.metric_name().into(),
        value,
        retrieval,
    })
}

/// Applies a fresh uniform permutation of frame order to every stack;
/// repetition `rep` of clip `i` uses its own sub-seed.
pub fn permute_frames(videos: &[Frames], shuffle_seed: u64, rep: usize) -> Vec<Frames> {
    videos
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut order: Vec<usize> = (0..v.t).collect();
            let index = (rep as u64) << 32 | i as u64;
            order.shuffle(&mut derived_rng(shuffle_seed, stream::SHUFFLE, index));
            v.select(&order)
        })
        .collect()
}

/// Metric on uniformly sampled ordered frames, then averaged over
/// `num_shuffles` independently permuted copies.
pub fn shuffle_test(
    model: &HiteaModel,
    clips: &[VideoClip],
    vocab: &Vocab,
    task: Task,
    config: &EvalConfig,
    shuffle_seed: u64,
    num_shuffles: usize,
) -> Result<ShuffleReport> {
    if num_shuffles == 0 {
        return Err(Error::config("num_shuffles", "must be at least 1"));
    }
    let t_s = model.config().frames;
    if t_s < 2 {
        return Err(Error::contract("shuffling needs at least 2 sampled frames"));
    }
    let videos = inference_views(clips, t_s);
    let original = evaluate_task(model, task, clips, &videos, vocab, config)?.value;
    let per_shuffle = (0..num_shuffles)
        .map(|rep| {
            let shuffled = permute_frames(&videos, shuffle_seed, rep);
            Ok(evaluate_task(model, task, clips, &shuffled, vocab, config)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let shuffled = per_shuffle.iter().sum::<f64>() / num_shuffles as f64;
    Ok(ShuffleReport {
        task,
        metric_name: task.metric_name().into(),
        original,
        shuffled,
        gap: original - shuffled,
        num_shuffles,
        shuffle_seed,
        per_shuffle,
    })
}
