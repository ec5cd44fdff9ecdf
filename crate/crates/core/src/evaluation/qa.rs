//! Multiple-choice and open-ended question answering over the corpus.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generation::generate_text;
use super::{encode_texts, encode_videos, rank_by_score, vtm_match_probs, EvalConfig};
use crate::corpus::{tokenize, Frames, Split, TokenizedText, VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::HiteaModel;
use crate::rng::{derived_rng, stream};

pub const MCQA_QUESTION: &str = "what happens";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqaItem {
    /// Index of the clip within the evaluated list.
    pub clip: usize,
    pub question: String,
    pub candidates: Vec<String>,
    pub answer: usize,
}

/// One item per clip. A temporal clip's options always include its
/// order-reversed sibling's caption; the rest are other captions drawn at
/// random. Option order is shuffled per item.
pub fn build_mcqa_items(clips: &[VideoClip], num_candidates: usize, seed: u64) -> Result<Vec<McqaItem>> {
    if num_candidates == 0 {
        return Err(Error::config("num_candidates", "must be at least 1"));
    }
    let by_id: HashMap<&str, &VideoClip> = clips.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut pool: Vec<&str> = clips.iter().map(|c| c.caption.as_str()).collect();
    pool.sort_unstable();
    pool.dedup();
    clips
        .iter()
        .enumerate()
        .map(|(i, clip)| {
            let mut rng = derived_rng(seed, stream::TASK_ITEMS, i as u64);
            let mut options = vec![clip.caption.clone()];
            if let Some(sib) = clip.pair_id.as_deref().and_then(|id| by_id.get(id)) {
                if options.len() < num_candidates {
                    options.push(sib.caption.clone());
                }
            }
            let mut others: Vec<&str> = pool
                .iter()
                .copied()
                .filter(|c| !options.iter().any(|o| o == c))
                .collect();
            others.shuffle(&mut rng);
            let need = num_candidates - options.len();
            if others.len() < need {
                return Err(Error::Data(format!(
                    "not enough distinct captions for {num_candidates} options"
                )));
            }
            options.extend(others[..need].iter().map(|s| s.to_string()));
            let mut order: Vec<usize> = (0..options.len()).collect();
            order.shuffle(&mut rng);
            Ok(McqaItem {
                clip: i,
                question: MCQA_QUESTION.into(),
                candidates: order.iter().map(|&o| options[o].clone()).collect(),
                answer: order.iter().position(|&o| o == 0).expect("correct option present"),
            })
        })
        .collect()
}

fn qa_text(question: &str, candidate: &str, vocab: &Vocab) -> Result<TokenizedText> {
    tokenize(&format!("{question} {candidate}"), vocab)
}

/// Percentage of items whose highest-scoring option (by matching
/// probability, lowest index on ties) is the answer.
pub fn mcqa_eval(
    model: &HiteaModel,
    videos: &[Frames],
    items: &[McqaItem],
    vocab: &Vocab,
    config: &EvalConfig,
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::contract("no multiple-choice items"));
    }
    let v = encode_videos(model, videos, config.batch_size)?;
    let mut texts = Vec::new();
    let mut pairs = Vec::new();
    for item in items {
        for cand in &item.candidates {
            pairs.push((item.clip, texts.len()));
            texts.push(qa_text(&item.question, cand, vocab)?);
        }
    }
    let t = encode_texts(model, &texts, config.batch_size)?;
    let probs = vtm_match_probs(model, &v, &t, &pairs, config.batch_size)?;
    let mut offset = 0;
    let mut correct = 0;
    for item in items {
        let scores = &probs[offset..offset + item.candidates.len()];
        offset += item.candidates.len();
        if rank_by_score(scores)[0] == item.answer {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / items.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenQaItem {
    pub clip: usize,
    pub question: String,
    pub answer: String,
}

/// Temporal clips ask which actor moves first (even positions) or last
/// (odd positions); static clips ask what is shown.
pub fn build_openqa_items(clips: &[VideoClip]) -> Vec<OpenQaItem> {
    clips
        .iter()
        .enumerate()
        .filter_map(|(i, clip)| {
            let first = clip.moments.first()?;
            let last = clip.moments.last()?;
            let (question, answer) = match clip.split {
                Split::Temporal if i % 2 == 0 => ("what moves first", first.actor_phrase()),
                Split::Temporal => ("what moves last", last.actor_phrase()),
                Split::Static => ("what is shown", first.actor_phrase()),
            };
            Some(OpenQaItem {
                clip: i,
                question: question.into(),
                answer,
            })
        })
        .collect()
}

/// Exact-match percentage of generated answers. The question conditions the
/// decoder through the fusion encoder.
pub fn openqa_eval(
    model: &HiteaModel,
    videos: &[Frames],
    items: &[OpenQaItem],
    vocab: &Vocab,
    config: &EvalConfig,
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::contract("no open-ended items"));
    }
    let v = encode_videos(model, videos, config.batch_size)?;
    let questions = items
        .iter()
        .map(|it| tokenize(&it.question, vocab))
        .collect::<Result<Vec<_>>>()?;
    let t = encode_texts(model, &questions, config.batch_size)?;
    let mut correct = 0;
    for (qi, item) in items.iter().enumerate() {
        let fused = model.fuse(&v.select(&[item.clip])?, &t.select(&[qi])?.full()?)?;
        let out = generate_text(model, &fused.memory()?, &[], config.beam_width, config.max_steps)?;
        let content: Vec<u32> = out.into_iter().take_while(|&id| id != vocab.sep_id()).collect();
        if vocab.decode(&content) == item.answer {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / items.len() as f64)
}
