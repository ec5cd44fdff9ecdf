//! Word-embedding text encoder with padding-aware self-attention.

use candle_core::Tensor;

use super::layers::{key_bias, prefix_valid, EncoderLayer, LayerNorm, INIT_STD};
use super::params::ParamStore;
use super::ModelConfig;
use crate::error::Result;

pub(crate) struct TextEncoder {
    tok_emb: Tensor,
    pos_emb: Tensor,
    layers: Vec<EncoderLayer>,
    ln: LayerNorm,
}

impl TextEncoder {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.hidden_dim;
        Ok(TextEncoder {
            tok_emb: store.normal("text.tok_emb", &[cfg.vocab_size, d], INIT_STD)?,
            pos_emb: store.normal("text.pos_emb", &[cfg.max_text_len, d], INIT_STD)?,
            layers: (0..cfg.text_layers)
                .map(|i| EncoderLayer::new(store, &format!("text.layer{i}"), d, cfg.heads, cfg.mlp_hidden()))
                .collect::<Result<Vec<_>>>()?,
            ln: LayerNorm::new(store, "text.ln", d)?,
        })
    }

    /// `ids: [B, L]` with `valid[i]` leading non-pad positions -> `[B, L, D]`.
    pub fn forward(&self, ids: &Tensor, valid: &[usize]) -> candle_core::Result<Tensor> {
        let (b, l) = ids.dims2()?;
        let d = self.tok_emb.dim(1)?;
        let emb = self.tok_emb.index_select(&ids.flatten_all()?, 0)?.reshape((b, l, d))?;
        let mut h = emb.broadcast_add(&self.pos_emb.narrow(0, 0, l)?)?;
        let bias = key_bias(&prefix_valid(valid, l), h.dtype(), h.device())?;
        for layer in &self.layers {
            h = layer.forward(&h, Some(&bias))?;
        }
        self.ln.forward(&h)
    }
}
