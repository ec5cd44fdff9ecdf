//! Masked and prefix language modelling targets.

use candle_core::Tensor;
use rand::Rng as _;

use crate::corpus::TokenizedText;
use crate::error::{Error, Result};
use crate::model::layers::log_softmax_last;
use crate::rng::Rng;

const PAD: u32 = 0;
const CLS: u32 = 1;
const MASK: u32 = 3;
const FIRST_CONTENT: u32 = 4;

/// A caption with some content positions corrupted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmCorruption {
    pub text: TokenizedText,
    /// Token positions whose original ids must be predicted.
    pub positions: Vec<usize>,
    pub targets: Vec<u32>,
}

/// Selects each content position with probability `ratio`; a selected
/// position becomes `[MASK]` (80%), a random content word (10%) or stays (10%).
pub fn corrupt_for_mlm(text: &TokenizedText, vocab_size: usize, ratio: f64, rng: &mut Rng) -> Result<MlmCorruption> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::config("mask_ratio", "must lie in (0, 1]"));
    }
    let mut out = text.clone();
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    for (p, &is_content) in text.content_mask.iter().enumerate() {
        if !is_content || !rng.gen_bool(ratio) {
            continue;
        }
        positions.push(p);
        targets.push(text.token_ids[p]);
        let r: f64 = rng.gen();
        if r < 0.8 {
            out.token_ids[p] = MASK;
        } else if r < 0.9 {
            out.token_ids[p] = rng.gen_range(FIRST_CONTENT..vocab_size as u32);
        }
    }
    Ok(MlmCorruption {
        text: out,
        positions,
        targets,
    })
}

/// Per-token mean cross-entropy over every selected position of the batch.
///
/// `logits: [B, Lt, V]` over fused text positions, where position `p` of a
/// row is token position `p`. Returns a zero scalar when nothing was selected.
pub fn mlm_loss_from_logits(logits: &Tensor, corruptions: &[MlmCorruption]) -> Result<Tensor> {
    let (b, lt, v) = logits.dims3()?;
    if corruptions.len() != b {
        return Err(Error::contract("mlm logits and corruptions disagree"));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, c) in corruptions.iter().enumerate() {
        for (&p, &t) in c.positions.iter().zip(&c.targets) {
            if p >= lt {
                return Err(Error::contract(format!(
                    "masked position {p} beyond fused text width {lt}"
                )));
            }
            rows.push((i * lt + p) as u32);
            targets.push(t);
        }
    }
    token_cross_entropy(&logits.reshape((b * lt, v))?, &rows, &targets)
}

/// Mean of `-log softmax(flat[row])[target]`; zero for an empty set.
pub(crate) fn token_cross_entropy(flat: &Tensor, rows: &[u32], targets: &[u32]) -> Result<Tensor> {
    if rows.is_empty() {
        return Ok(flat.sum_all()?.affine(0.0, 0.0)?);
    }
    let idx = Tensor::from_vec(rows.to_vec(), rows.len(), flat.device())?;
    let picked = flat.index_select(&idx, 0)?;
    let t = Tensor::from_vec(targets.to_vec(), (targets.len(), 1), flat.device())?;
    Ok(log_softmax_last(&picked)?.gather(&t, 1)?.mean_all()?.neg()?)
}

/// One prefix-completion instance: the encoder sees `prefix`, the decoder
/// reads `decoder_input` and predicts `targets` position by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSplit {
    /// Number of tokens L_p in the prefix, including `[CLS]`.
    pub prefix_len: usize,
    pub prefix: TokenizedText,
    pub decoder_input: Vec<u32>,
    pub targets: Vec<u32>,
}

/// Splits a caption of `L = N + 2` tokens at `L_p ~ U{1..L-1}`. Targets are
/// tokens `L_p..L` (ending in `[SEP]`); the decoder input is `[CLS]` followed
/// by all targets but the last.
pub fn split_prefix(text: &TokenizedText, rng: &mut Rng) -> Result<PrefixSplit> {
    let l = text.token_ids.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1);
    if l < 2 {
        return Err(Error::contract(format!(
            "prefix modelling needs at least 2 tokens, got {l}"
        )));
    }
    split_prefix_at(text, rng.gen_range(1..l))
}

pub fn split_prefix_at(text: &TokenizedText, prefix_len: usize) -> Result<PrefixSplit> {
    let l = text.token_ids.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1);
    if prefix_len < 1 || prefix_len >= l {
        return Err(Error::contract(format!("prefix length {prefix_len} outside 1..{l}")));
    }
    let prefix = TokenizedText {
        token_ids: text.token_ids[..prefix_len].to_vec(),
        content_mask: text.content_mask[..prefix_len].to_vec(),
    };
    let targets = text.token_ids[prefix_len..l].to_vec();
    let mut decoder_input = vec![CLS];
    decoder_input.extend_from_slice(&targets[..targets.len() - 1]);
    Ok(PrefixSplit {
        prefix_len,
        prefix,
        decoder_input,
        targets,
    })
}

/// Right-pads decoder inputs with `[PAD]` to a common width.
pub fn pad_rows(rows: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    rows.iter()
        .map(|r| r.iter().copied().chain(std::iter::repeat(PAD)).take(width).collect())
        .collect()
}

/// Per-token mean cross-entropy of decoder `logits: [B, W, V]` against the
/// splits' targets; padded positions are ignored.
pub fn prefix_loss_from_logits(logits: &Tensor, splits: &[PrefixSplit]) -> Result<Tensor> {
    let (b, w, v) = logits.dims3()?;
    if splits.len() != b {
        return Err(Error::contract("decoder logits and prefix splits disagree"));
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, s) in splits.iter().enumerate() {
        if s.targets.len() > w {
            return Err(Error::contract("decoder logits narrower than targets"));
        }
        for (j, &t) in s.targets.iter().enumerate() {
            rows.push((i * w + j) as u32);
            targets.push(t);
        }
    }
    token_cross_entropy(&logits.reshape((b * w, v))?, &rows, &targets)
}
