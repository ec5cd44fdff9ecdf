#![allow(dead_code)]

use hitea::corpus::{generate_corpus, CorpusSpec, VideoClip, Vocab};
use hitea::model::ModelConfig;

pub fn corpus(num_videos: usize, seed: u64) -> (Vocab, Vec<VideoClip>) {
    let spec = CorpusSpec {
        num_videos,
        frames_per_clip: 16,
        seed,
        ..CorpusSpec::default()
    };
    (spec.vocab.clone(), generate_corpus(&spec).unwrap())
}

/// One layer per stack, D=16.
pub fn small_config(vocab: &Vocab) -> ModelConfig {
    ModelConfig {
        hidden_dim: 16,
        heads: 2,
        video_layers: 1,
        text_layers: 1,
        fusion_layers: 1,
        decoder_layers: 1,
        proj_dim: 8,
        vocab_size: vocab.len(),
        ..ModelConfig::default()
    }
}
