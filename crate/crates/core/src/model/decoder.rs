//! Autoregressive text decoder conditioned on a memory sequence.

use candle_core::Tensor;

use super::layers::{causal_bias, Attention, LayerNorm, Linear, Mlp, INIT_STD};
use super::params::ParamStore;
use super::ModelConfig;
use crate::error::Result;

struct DecoderLayer {
    ln_self: LayerNorm,
    self_attn: Attention,
    ln_cross: LayerNorm,
    cross_attn: Attention,
    ln_mlp: LayerNorm,
    mlp: Mlp,
}

pub(crate) struct TextDecoder {
    tok_emb: Tensor,
    pos_emb: Tensor,
    layers: Vec<DecoderLayer>,
    ln: LayerNorm,
    pub(crate) head: Linear,
}

impl TextDecoder {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self> {
        let (d, h, m) = (cfg.hidden_dim, cfg.heads, cfg.mlp_hidden());
        let layers = (0..cfg.decoder_layers)
            .map(|i| {
                let n = format!("decoder.layer{i}");
                Ok(DecoderLayer {
                    ln_self: LayerNorm::new(store, &format!("{n}.ln_self"), d)?,
                    self_attn: Attention::new(store, &format!("{n}.self_attn"), d, h)?,
                    ln_cross: LayerNorm::new(store, &format!("{n}.ln_cross"), d)?,
                    cross_attn: Attention::new(store, &format!("{n}.cross_attn"), d, h)?,
                    ln_mlp: LayerNorm::new(store, &format!("{n}.ln_mlp"), d)?,
                    mlp: Mlp::new(store, &format!("{n}.mlp"), d, m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TextDecoder {
            tok_emb: store.normal("decoder.tok_emb", &[cfg.vocab_size, d], INIT_STD)?,
            pos_emb: store.normal("decoder.pos_emb", &[cfg.max_text_len, d], INIT_STD)?,
            layers,
            ln: LayerNorm::new(store, "decoder.ln", d)?,
            head: Linear::new(store, "decoder.head", d, cfg.vocab_size)?,
        })
    }

    /// `ids: [B, L]`, `memory: [B, Lm, D]` -> logits `[B, L, V]`.
    pub fn forward(&self, ids: &Tensor, memory: &Tensor, memory_bias: Option<&Tensor>) -> candle_core::Result<Tensor> {
        let (b, l) = ids.dims2()?;
        let d = self.tok_emb.dim(1)?;
        let emb = self.tok_emb.index_select(&ids.flatten_all()?, 0)?.reshape((b, l, d))?;
        let mut x = emb.broadcast_add(&self.pos_emb.narrow(0, 0, l)?)?;
        let causal = causal_bias(l, x.dtype(), x.device())?;
        for layer in &self.layers {
            let h = layer.ln_self.forward(&x)?;
            x = (&x + layer.self_attn.forward(&h, &h, Some(&causal))?)?;
            let h = layer.ln_cross.forward(&x)?;
            x = (&x + layer.cross_attn.forward(&h, memory, memory_bias)?)?;
            x = (&x + layer.mlp.forward(&layer.ln_mlp.forward(&x)?)?)?;
        }
        self.head.forward(&self.ln.forward(&x)?)
    }
}
