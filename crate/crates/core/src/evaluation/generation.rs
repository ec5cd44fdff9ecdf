//! Beam-search text generation and template-match captioning.

use candle_core::{DType, IndexOp};

use super::{encode_videos, EvalConfig};
use crate::corpus::{Frames, VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::{HiteaModel, Memory};

pub const CAPTION_PROMPT: &str = "a video of";

const PAD: u32 = 0;
const CLS: u32 = 1;
const SEP: u32 = 2;
const MASK: u32 = 3;

/// Log-probabilities of the next token after each row, with tokens that can
/// never be generated set to -inf.
fn next_log_probs(model: &HiteaModel, memory: &Memory, rows: &[Vec<u32>]) -> Result<Vec<Vec<f64>>> {
    let mem = memory.select(&vec![0; rows.len()])?;
    let logits = model.decode(&mem, rows)?;
    let last = logits.i((.., rows[0].len() - 1))?.to_dtype(DType::F64)?;
    let rows: Vec<Vec<f64>> = last.to_vec2()?;
    Ok(rows
        .into_iter()
        .map(|mut r| {
            for id in [PAD, CLS, MASK] {
                r[id as usize] = f64::NEG_INFINITY;
            }
            let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + r.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            r.iter().map(|x| x - lse).collect()
        })
        .collect())
}

/// Token ids by decreasing log-probability, lower id first on ties.
fn ranked_tokens(logp: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..logp.len()).filter(|&i| logp[i].is_finite()).collect();
    ids.sort_by(|&a, &b| logp[b].total_cmp(&logp[a]));
    ids
}

fn step_budget(model: &HiteaModel, prompt: &[u32], max_steps: usize) -> Result<usize> {
    if max_steps == 0 {
        return Err(Error::config("max_steps", "must be at least 1"));
    }
    // Decoder rows are [CLS] + prompt + generated and must stay below max_text_len.
    let room = model.config().max_text_len.saturating_sub(1 + prompt.len());
    if room == 0 {
        return Err(Error::contract("prompt leaves no room to generate"));
    }
    Ok(max_steps.min(room))
}

/// Picks the most likely token at every step until `[SEP]` or the step cap.
pub fn greedy_decode(model: &HiteaModel, memory: &Memory, prompt: &[u32], max_steps: usize) -> Result<Vec<u32>> {
    let steps = step_budget(model, prompt, max_steps)?;
    let mut row: Vec<u32> = std::iter::once(CLS).chain(prompt.iter().copied()).collect();
    let mut out = Vec::new();
    for _ in 0..steps {
        let logp = next_log_probs(model, memory, std::slice::from_ref(&row))?;
        let tok = ranked_tokens(&logp[0])[0] as u32;
        out.push(tok);
        row.push(tok);
        if tok == SEP {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<u32>,
    log_prob: f64,
}

impl Hypothesis {
    fn score(&self) -> f64 {
        self.log_prob / self.tokens.len().max(1) as f64
    }
}

/// Length-normalised beam search over a single-item `memory`.
///
/// A hypothesis leaves the beam when it emits `[SEP]`; search runs until no
/// live hypothesis remains or the step cap is reached. Returns the best
/// hypothesis's tokens, never more than `max_steps` of them. The cap is
/// further limited so the decoder input stays within the model's text length.
pub fn generate_text(
    model: &HiteaModel,
    memory: &Memory,
    prompt: &[u32],
    beam_width: usize,
    max_steps: usize,
) -> Result<Vec<u32>> {
    if beam_width == 0 {
        return Err(Error::config("beam_width", "must be at least 1"));
    }
    if memory.batch() != 1 {
        return Err(Error::contract("generation expects a single-item memory"));
    }
    let steps = step_budget(model, prompt, max_steps)?;
    let head: Vec<u32> = std::iter::once(CLS).chain(prompt.iter().copied()).collect();
    let mut live = vec![Hypothesis {
        tokens: vec![],
        log_prob: 0.0,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..steps {
        if live.is_empty() {
            break;
        }
        let rows: Vec<Vec<u32>> = live
            .iter()
            .map(|h| head.iter().chain(&h.tokens).copied().collect())
            .collect();
        let logps = next_log_probs(model, memory, &rows)?;
        let mut cands: Vec<Hypothesis> = Vec::new();
        for (h, logp) in live.iter().zip(&logps) {
            for &tok in ranked_tokens(logp).iter().take(beam_width) {
                let mut tokens = h.tokens.clone();
                tokens.push(tok as u32);
                cands.push(Hypothesis {
                    tokens,
                    log_prob: h.log_prob + logp[tok],
                });
            }
        }
        cands.sort_by(|a, b| b.score().total_cmp(&a.score()));
        cands.truncate(beam_width);
        live.clear();
        for c in cands {
            if c.tokens.last() == Some(&SEP) {
                finished.push(c);
            } else {
                live.push(c);
            }
        }
    }
    finished.extend(live);
    let best = finished
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.score().total_cmp(&b.score()).then(ib.cmp(ia)))
        .map(|(_, h)| h.tokens.clone())
        .unwrap_or_default();
    Ok(best)
}

/// Percentage of clips whose generated caption equals the reference exactly.
/// The decoder attends to the video alone and continues the fixed prompt.
pub fn caption_eval(
    model: &HiteaModel,
    videos: &[Frames],
    clips: &[VideoClip],
    vocab: &Vocab,
    config: &EvalConfig,
) -> Result<f64> {
    if clips.is_empty() {
        return Err(Error::contract("no clips to caption"));
    }
    let prompt = vocab.encode_words(CAPTION_PROMPT)?;
    let v = encode_videos(model, videos, config.batch_size)?;
    let mut correct = 0;
    for (i, clip) in clips.iter().enumerate() {
        let memory = Memory::from_video(&v.select(&[i])?);
        let out = generate_text(model, &memory, &prompt, config.beam_width, config.max_steps)?;
        let content: Vec<u32> = out.into_iter().take_while(|&id| id != SEP).collect();
        if vocab.decode(&content) == clip.caption {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / clips.len() as f64)
}
