//! Moment-word mining and the cross-modal moment exploration loss.

use candle_core::{DType, Tensor, D};

use crate::error::{Error, Result};
use crate::model::layers::{key_bias, l2_normalize, log_softmax_last, prefix_valid};

/// Words of one caption ranked against a short-view video summary.
///
/// Indices are 0-based content-word positions; `indices` is in original
/// text order and `ranking` lists all N positions by decreasing similarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveWordSet {
    pub indices: Vec<usize>,
    pub ranking: Vec<usize>,
    pub k: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::contract("cosine similarity of a zero vector"));
    }
    Ok(dot / (na * nb))
}

/// Selects the `min(k, N)` words most cosine-similar to `video`. Ties keep
/// the lower word index first.
pub fn mine_positive_words(words: &[Vec<f64>], video: &[f64], k: usize) -> Result<PositiveWordSet> {
    if words.is_empty() {
        return Err(Error::contract("no candidate words"));
    }
    if k == 0 {
        return Err(Error::contract("K must be at least 1"));
    }
    let sims = words.iter().map(|w| cosine(w, video)).collect::<Result<Vec<_>>>()?;
    let mut ranking: Vec<usize> = (0..words.len()).collect();
    // Stable sort: equal similarities keep index order.
    ranking.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
    let take = k.min(words.len());
    let mut indices = ranking[..take].to_vec();
    indices.sort_unstable();
    Ok(PositiveWordSet {
        indices,
        ranking,
        k: take,
    })
}

/// Mines every item of a batch from detached tensors: `video: [B, D]`,
/// `words: [B, Nmax, D]` with `n[i]` valid rows.
pub fn mine_batch(video: &Tensor, words: &Tensor, n: &[usize], k: usize) -> Result<Vec<PositiveWordSet>> {
    let video: Vec<Vec<f64>> = video.detach().to_dtype(DType::F64)?.to_vec2()?;
    let words: Vec<Vec<Vec<f64>>> = words.detach().to_dtype(DType::F64)?.to_vec3()?;
    video
        .iter()
        .zip(words)
        .zip(n)
        .map(|((v, w), &ni)| mine_positive_words(&w[..ni], v, k))
        .collect()
}

/// Mean over the batch of the mean over selected words of the negative log
/// softmax of `cos(v, w) / tau` across each caption's words.
///
/// `video: [B, D]`, `words: [B, Nmax, D]` with `n[i]` valid rows, `tau` a scalar.
pub fn cme_loss(video: &Tensor, words: &Tensor, n: &[usize], sets: &[PositiveWordSet], tau: &Tensor) -> Result<Tensor> {
    let (b, nmax, _) = words.dims3()?;
    if sets.len() != b || n.len() != b || video.dim(0)? != b {
        return Err(Error::contract("cme batch sizes disagree"));
    }
    if tau.to_dtype(DType::F64)?.to_scalar::<f64>()? <= 0.0 {
        return Err(Error::contract("temperature must be positive"));
    }
    let v = l2_normalize(video)?.unsqueeze(2)?;
    let w = l2_normalize(words)?;
    let logits = w.matmul(&v)?.squeeze(2)?.broadcast_div(tau)?;
    let bias = key_bias(&prefix_valid(n, nmax), logits.dtype(), logits.device())?.reshape((b, nmax))?;
    let logp = log_softmax_last(&(logits + bias)?)?;
    let mut weights = vec![0.0f64; b * nmax];
    for (i, set) in sets.iter().enumerate() {
        if set.indices.is_empty() {
            return Err(Error::contract(format!("empty positive word set for item {i}")));
        }
        for &k in &set.indices {
            weights[i * nmax + k] = 1.0 / (set.indices.len() * b) as f64;
        }
    }
    let weights = Tensor::from_vec(weights, (b, nmax), logp.device())?.to_dtype(logp.dtype())?;
    Ok((logp * weights)?.sum_all()?.neg()?)
}

/// Padded content-word rows `[B, Nmax, D]` from a text sequence whose
/// position 0 is `[CLS]`.
pub fn content_rows(seq: &Tensor, n: &[usize]) -> Result<Tensor> {
    let nmax = n.iter().copied().max().unwrap_or(0);
    if nmax == 0 {
        return Err(Error::contract("no content words"));
    }
    Ok(seq.narrow(D::Minus2, 1, nmax)?)
}
