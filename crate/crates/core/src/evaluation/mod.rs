//! Downstream evaluation: retrieval, question answering, captioning, the
//! frame-shuffling probe and the K sweep.

mod generation;
mod qa;
mod retrieval;
mod shuffle;
mod sweep;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use generation::{caption_eval, generate_text, greedy_decode, CAPTION_PROMPT};
pub use qa::{build_mcqa_items, build_openqa_items, mcqa_eval, openqa_eval, McqaItem, OpenQaItem};
pub use retrieval::{diagonal_ranks, rank_by_score, recall_report, rerank, retrieve, RetrievalReport};
pub use shuffle::{evaluate_task, permute_frames, shuffle_test, ShuffleReport, Task, TaskResult};
pub use sweep::{k_sweep_experiment, KSweepRow};

use crate::corpus::{Frames, TokenizedText, VideoClip};
use crate::error::{Error, Result};
use crate::model::layers::softmax_last;
use crate::model::{HiteaModel, TextEmbeddings, VideoEmbeddings};
use crate::views::uniform_long_view;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Shortlist size re-scored by the matching head.
    pub rerank_k: usize,
    /// Rows per forward pass.
    pub batch_size: usize,
    pub beam_width: usize,
    pub max_steps: usize,
    /// Answer options per multiple-choice item.
    pub num_candidates: usize,
    /// Seed for building question-answering items.
    pub item_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rerank_k: 128,
            batch_size: 64,
            beam_width: 3,
            max_steps: 40,
            num_candidates: 5,
            item_seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rerank_k", self.rerank_k),
            ("batch_size", self.batch_size),
            ("beam_width", self.beam_width),
            ("max_steps", self.max_steps),
            ("num_candidates", self.num_candidates),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn fingerprint<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// Uniformly sampled inference views, one per clip.
pub fn inference_views(clips: &[VideoClip], frames_per_view: usize) -> Vec<Frames> {
    clips.iter().map(|c| uniform_long_view(c, frames_per_view)).collect()
}

pub(crate) fn encode_videos(model: &HiteaModel, videos: &[Frames], chunk: usize) -> Result<VideoEmbeddings> {
    let parts = videos
        .chunks(chunk.max(1))
        .map(|c| model.encode_video(&c.iter().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    VideoEmbeddings::concat(&parts.iter().collect::<Vec<_>>())
}

pub(crate) fn encode_texts(model: &HiteaModel, texts: &[TokenizedText], chunk: usize) -> Result<TextEmbeddings> {
    // One call keeps a single padded width for the whole set.
    let width = texts.iter().map(|t| t.unpadded_len()).max().unwrap_or(0);
    let padded: Vec<TokenizedText> = texts.iter().map(|t| t.padded(width)).collect();
    let mut seqs = Vec::new();
    let mut content = Vec::new();
    let mut valid = Vec::new();
    for c in padded.chunks(chunk.max(1)) {
        let e = model.encode_text(&c.iter().collect::<Vec<_>>())?;
        let pad = width - e.seq.dim(1)?;
        seqs.push(if pad > 0 {
            let (b, _, d) = e.seq.dims3()?;
            Tensor::cat(
                &[&e.seq, &Tensor::zeros((b, pad, d), e.seq.dtype(), e.seq.device())?],
                1,
            )?
        } else {
            e.seq
        });
        content.extend(e.content);
        valid.extend(e.valid);
    }
    Ok(TextEmbeddings {
        seq: Tensor::cat(&seqs, 0)?,
        content,
        valid,
    })
}

/// Matching probability for each `(video, text)` index pair.
pub(crate) fn vtm_match_probs(
    model: &HiteaModel,
    videos: &VideoEmbeddings,
    texts: &TextEmbeddings,
    pairs: &[(usize, usize)],
    chunk: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pairs.len());
    for c in pairs.chunks(chunk.max(1)) {
        let vids: Vec<usize> = c.iter().map(|p| p.0).collect();
        let tids: Vec<usize> = c.iter().map(|p| p.1).collect();
        let fused = model.fuse(&videos.select(&vids)?, &texts.select(&tids)?.full()?)?;
        let probs = softmax_last(&model.vtm_logits(&fused.video_cls()?)?)?;
        let p: Vec<Vec<f64>> = probs.to_dtype(DType::F64)?.to_vec2()?;
        out.extend(p.into_iter().map(|row| row[1]));
    }
    Ok(out)
}
