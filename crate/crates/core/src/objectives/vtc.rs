//! Video-text contrastive loss against in-batch and queued negatives.

use std::collections::VecDeque;

use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::model::layers::log_softmax_last;

/// FIFO of past unit-norm projections, tagged with the clip they came from.
#[derive(Debug, Clone)]
pub struct NegativeQueue {
    capacity: usize,
    entries: VecDeque<QueueEntry>,
}

#[derive(Debug, Clone)]
struct QueueEntry {
    owner: String,
    video: Vec<f32>,
    text: Vec<f32>,
}

impl NegativeQueue {
    pub fn new(capacity: usize) -> Self {
        NegativeQueue {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends detached rows `[B, E]`, evicting the oldest beyond capacity.
    pub fn enqueue(&mut self, owners: &[String], video: &Tensor, text: &Tensor) -> Result<()> {
        let video: Vec<Vec<f32>> = video.detach().to_dtype(DType::F32)?.to_vec2()?;
        let text: Vec<Vec<f32>> = text.detach().to_dtype(DType::F32)?.to_vec2()?;
        if video.len() != owners.len() || text.len() != owners.len() {
            return Err(Error::contract("queue rows and owners disagree"));
        }
        for ((owner, video), text) in owners.iter().zip(video).zip(text) {
            if self.capacity == 0 {
                break;
            }
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(QueueEntry {
                owner: owner.clone(),
                video,
                text,
            });
        }
        Ok(())
    }

    pub fn owners(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.owner.as_str())
    }

    /// Queued `(video, text)` rows whose owner is not in `exclude`, as
    /// `[Q, E]` tensors, or `None` when nothing remains.
    pub fn negatives(&self, exclude: &[String], like: &Tensor) -> Result<Option<(Tensor, Tensor)>> {
        let keep: Vec<&QueueEntry> = self.entries.iter().filter(|e| !exclude.contains(&e.owner)).collect();
        if keep.is_empty() {
            return Ok(None);
        }
        let e = keep[0].video.len();
        let stack = |f: fn(&QueueEntry) -> &Vec<f32>| -> Result<Tensor> {
            let flat: Vec<f32> = keep.iter().flat_map(|q| f(q).iter().copied()).collect();
            Ok(Tensor::from_vec(flat, (keep.len(), e), like.device())?.to_dtype(like.dtype())?)
        };
        Ok(Some((stack(|q| &q.video)?, stack(|q| &q.text)?)))
    }
}

/// Mean softmax cross-entropy of the diagonal targets of `logits: [B, C]`.
pub(crate) fn diagonal_cross_entropy(logits: &Tensor) -> Result<Tensor> {
    let b = logits.dim(0)?;
    let targets = Tensor::from_vec((0..b as u32).collect::<Vec<_>>(), (b, 1), logits.device())?;
    Ok(log_softmax_last(logits)?.gather(&targets, 1)?.mean_all()?.neg()?)
}

/// `½(L_v2t + L_t2v)` for unit-norm `video, text: [B, E]`. Queued rows owned
/// by a batch clip are skipped. The queue is not modified.
pub fn vtc_loss(
    video: &Tensor,
    text: &Tensor,
    tau: &Tensor,
    queue: &NegativeQueue,
    owners: &[String],
) -> Result<Tensor> {
    let b = video.dim(0)?;
    if b == 0 {
        return Err(Error::contract("empty contrastive batch"));
    }
    if tau.to_dtype(DType::F64)?.to_scalar::<f64>()? <= 0.0 {
        return Err(Error::contract("temperature must be positive"));
    }
    let (all_video, all_text) = match queue.negatives(owners, video)? {
        Some((qv, qt)) => (Tensor::cat(&[video, &qv], 0)?, Tensor::cat(&[text, &qt], 0)?),
        None => (video.clone(), text.clone()),
    };
    let v2t = video.matmul(&all_text.t()?)?.broadcast_div(tau)?;
    let t2v = text.matmul(&all_video.t()?)?.broadcast_div(tau)?;
    let loss = (diagonal_cross_entropy(&v2t)? + diagonal_cross_entropy(&t2v)?)?;
    Ok((loss * 0.5)?)
}
