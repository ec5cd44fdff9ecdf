//! Text-to-video retrieval: contrastive shortlist, then matching rerank.

use serde::{Deserialize, Serialize};

use super::{encode_texts, encode_videos, vtm_match_probs, EvalConfig};
use crate::corpus::{Frames, TokenizedText};
use crate::error::{Error, Result};
use crate::model::HiteaModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub mean_recall: f64,
    pub direction: String,
    pub num_items: usize,
    pub rerank_k: usize,
}

/// Recall percentages from the 0-based rank of each query's ground truth.
pub fn recall_report(gt_ranks: &[usize], rerank_k: usize) -> Result<RetrievalReport> {
    if gt_ranks.is_empty() {
        return Err(Error::contract("no retrieval queries"));
    }
    let n = gt_ranks.len() as f64;
    let at = |k: usize| 100.0 * gt_ranks.iter().filter(|&&r| r < k).count() as f64 / n;
    let (r1, r5, r10) = (at(1), at(5), at(10));
    Ok(RetrievalReport {
        r1,
        r5,
        r10,
        mean_recall: (r1 + r5 + r10) / 3.0,
        direction: "text-to-video".into(),
        num_items: gt_ranks.len(),
        rerank_k,
    })
}

/// Orders candidates by decreasing score; equal scores keep the lower index first.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Final candidate ranking per query.
///
/// `sim[q][c]` gives the stage-1 order. The first `min(rerank_k, C)`
/// candidates of each query are passed to `rescore`, which returns one score
/// per shortlisted candidate; the shortlist is reordered by those scores
/// (stage-1 order breaks ties) and the remaining candidates keep their
/// stage-1 order.
pub fn rerank<F>(sim: &[Vec<f64>], rerank_k: usize, mut rescore: F) -> Result<Vec<Vec<usize>>>
where
    F: FnMut(&[Vec<usize>]) -> Result<Vec<Vec<f64>>>,
{
    if rerank_k == 0 {
        return Err(Error::config("rerank_k", "must be at least 1"));
    }
    let stage1: Vec<Vec<usize>> = sim.iter().map(|row| rank_by_score(row)).collect();
    let shortlists: Vec<Vec<usize>> = stage1
        .iter()
        .map(|order| order[..rerank_k.min(order.len())].to_vec())
        .collect();
    if rerank_k == 1 {
        return Ok(stage1);
    }
    let scores = rescore(&shortlists)?;
    if scores.len() != shortlists.len() || scores.iter().zip(&shortlists).any(|(s, l)| s.len() != l.len()) {
        return Err(Error::contract("rescore returned the wrong number of scores"));
    }
    Ok(stage1
        .into_iter()
        .zip(shortlists)
        .zip(scores)
        .map(|((order, short), s)| {
            let k = short.len();
            let mut out: Vec<usize> = rank_by_score(&s).into_iter().map(|i| short[i]).collect();
            out.extend_from_slice(&order[k..]);
            out
        })
        .collect())
}

/// 0-based position of `i` in ranking `i`, for every query `i`.
pub fn diagonal_ranks(rankings: &[Vec<usize>]) -> Vec<usize> {
    rankings
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().position(|&c| c == i).expect("ranking is a permutation"))
        .collect()
}

/// Retrieves video `i` for text `i` among all `videos`.
pub fn retrieve(
    model: &HiteaModel,
    videos: &[Frames],
    texts: &[TokenizedText],
    config: &EvalConfig,
) -> Result<RetrievalReport> {
    if videos.is_empty() {
        return Err(Error::contract("empty retrieval split"));
    }
    if videos.len() != texts.len() {
        return Err(Error::contract("retrieval needs one text per video"));
    }
    let v = encode_videos(model, videos, config.batch_size)?;
    let t = encode_texts(model, texts, config.batch_size)?;
    let vf: Vec<Vec<f64>> = model
        .video_feature(&v.cls()?)?
        .to_dtype(candle_core::DType::F64)?
        .to_vec2()?;
    let tf: Vec<Vec<f64>> = model
        .text_feature(&t.cls()?)?
        .to_dtype(candle_core::DType::F64)?
        .to_vec2()?;
    let sim: Vec<Vec<f64>> = tf
        .iter()
        .map(|q| vf.iter().map(|c| q.iter().zip(c).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let rankings = rerank(&sim, config.rerank_k, |shortlists| {
        let pairs: Vec<(usize, usize)> = shortlists
            .iter()
            .enumerate()
            .flat_map(|(q, list)| list.iter().map(move |&c| (c, q)))
            .collect();
        let probs = vtm_match_probs(model, &v, &t, &pairs, config.batch_size)?;
        let mut it = probs.into_iter();
        Ok(shortlists.iter().map(|l| it.by_ref().take(l.len()).collect()).collect())
    })?;
    recall_report(&diagonal_ranks(&rankings), config.rerank_k)
}
