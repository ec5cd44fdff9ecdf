//! Multi-modal fusion encoder.
//!
//! Text positions run self-attention followed by cross-attention into the
//! video sequence. The video `[CLS]` attends jointly over the video tokens
//! and the current text states, which makes it the text-guided video
//! summary. Video patch tokens pass through unchanged, so the output is the
//! concatenation `[video cls, video tokens, text positions]`.

use candle_core::Tensor;

use super::layers::{Attention, LayerNorm, Mlp};
use super::params::ParamStore;
use super::ModelConfig;
use crate::error::Result;

struct FusionLayer {
    ln_self: LayerNorm,
    self_attn: Attention,
    ln_cross: LayerNorm,
    ln_video: LayerNorm,
    cross_attn: Attention,
    ln_text_mlp: LayerNorm,
    text_mlp: Mlp,
    ln_cls: LayerNorm,
    ln_context: LayerNorm,
    cls_attn: Attention,
    ln_cls_mlp: LayerNorm,
    cls_mlp: Mlp,
}

impl FusionLayer {
    fn new(store: &mut ParamStore, name: &str, cfg: &ModelConfig) -> Result<Self> {
        let (d, h, m) = (cfg.hidden_dim, cfg.heads, cfg.mlp_hidden());
        let ln = |store: &mut ParamStore, part: &str| LayerNorm::new(store, &format!("{name}.{part}"), d);
        Ok(FusionLayer {
            ln_self: ln(store, "ln_self")?,
            self_attn: Attention::new(store, &format!("{name}.self_attn"), d, h)?,
            ln_cross: ln(store, "ln_cross")?,
            ln_video: ln(store, "ln_video")?,
            cross_attn: Attention::new(store, &format!("{name}.cross_attn"), d, h)?,
            ln_text_mlp: ln(store, "ln_text_mlp")?,
            text_mlp: Mlp::new(store, &format!("{name}.text_mlp"), d, m)?,
            ln_cls: ln(store, "ln_cls")?,
            ln_context: ln(store, "ln_context")?,
            cls_attn: Attention::new(store, &format!("{name}.cls_attn"), d, h)?,
            ln_cls_mlp: ln(store, "ln_cls_mlp")?,
            cls_mlp: Mlp::new(store, &format!("{name}.cls_mlp"), d, m)?,
        })
    }
}

pub(crate) struct FusionEncoder {
    layers: Vec<FusionLayer>,
    ln_cls: LayerNorm,
    ln_text: LayerNorm,
}

impl FusionEncoder {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self> {
        Ok(FusionEncoder {
            layers: (0..cfg.fusion_layers)
                .map(|i| FusionLayer::new(store, &format!("fusion.layer{i}"), cfg))
                .collect::<Result<Vec<_>>>()?,
            ln_cls: LayerNorm::new(store, "fusion.ln_cls", cfg.hidden_dim)?,
            ln_text: LayerNorm::new(store, "fusion.ln_text", cfg.hidden_dim)?,
        })
    }

    /// `video: [B, 1+M, D]`, `text: [B, Lt, D]`, `text_bias: [B, 1, 1, Lt]`,
    /// `context_bias: [B, 1, 1, M + Lt]` -> `[B, 1+M+Lt, D]`.
    pub fn forward(
        &self,
        video: &Tensor,
        text: &Tensor,
        text_bias: &Tensor,
        context_bias: &Tensor,
    ) -> candle_core::Result<Tensor> {
        let m = video.dim(1)? - 1;
        let tokens = video.narrow(1, 1, m)?;
        let mut cls = video.narrow(1, 0, 1)?;
        let mut t = text.clone();
        for layer in &self.layers {
            let h = layer.ln_self.forward(&t)?;
            t = (&t + layer.self_attn.forward(&h, &h, Some(text_bias))?)?;
            let vid = layer.ln_video.forward(&Tensor::cat(&[&cls, &tokens], 1)?)?;
            t = (&t + layer.cross_attn.forward(&layer.ln_cross.forward(&t)?, &vid, None)?)?;
            t = (&t + layer.text_mlp.forward(&layer.ln_text_mlp.forward(&t)?)?)?;

            let context = layer.ln_context.forward(&Tensor::cat(&[&tokens, &t], 1)?)?;
            let q = layer.ln_cls.forward(&cls)?;
            cls = (&cls + layer.cls_attn.forward(&q, &context, Some(context_bias))?)?;
            cls = (&cls + layer.cls_mlp.forward(&layer.ln_cls_mlp.forward(&cls)?)?)?;
        }
        let cls = self.ln_cls.forward(&cls)?;
        let t = self.ln_text.forward(&t)?;
        Tensor::cat(&[&cls, &tokens, &t], 1)
    }
}
