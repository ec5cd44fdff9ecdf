//! Patch-embedding video encoder with joint space-time attention.

use candle_core::{IndexOp, Tensor};

use super::layers::{EncoderLayer, LayerNorm, Linear, INIT_STD};
use super::params::ParamStore;
use super::ModelConfig;
use crate::corpus::Frames;
use crate::error::{Error, Result};

pub(crate) struct VideoEncoder {
    patch_embed: Linear,
    cls: Tensor,
    spatial_pos: Tensor,
    temporal_pos: Tensor,
    layers: Vec<EncoderLayer>,
    ln: LayerNorm,
    ablation: bool,
}

impl VideoEncoder {
    pub fn new(store: &mut ParamStore, cfg: &ModelConfig) -> Result<Self> {
        let d = cfg.hidden_dim;
        let patch_embed = Linear::new(store, "video.patch_embed", cfg.patch_dim(), d)?;
        let cls = store.normal("video.cls", &[d], INIT_STD)?;
        let spatial_pos = store.normal("video.spatial_pos", &[cfg.patches_per_frame(), d], INIT_STD)?;
        let temporal_pos = store.normal("video.temporal_pos", &[cfg.frames, d], INIT_STD)?;
        let layers = (0..cfg.video_layers)
            .map(|i| EncoderLayer::new(store, &format!("video.layer{i}"), d, cfg.heads, cfg.mlp_hidden()))
            .collect::<Result<Vec<_>>>()?;
        let ln = LayerNorm::new(store, "video.ln", d)?;
        Ok(VideoEncoder {
            patch_embed,
            cls,
            spatial_pos,
            temporal_pos,
            layers,
            ln,
            ablation: cfg.order_invariant_ablation,
        })
    }

    /// `patches: [B, T, P, C*p*p]` -> `[B, 1 + T*P, D]`.
    pub fn forward(&self, patches: &Tensor) -> candle_core::Result<Tensor> {
        let (b, t, p, _) = patches.dims4()?;
        let d = self.cls.dim(0)?;
        let x = self.patch_embed.forward(patches)?.broadcast_add(&self.spatial_pos)?;
        if self.ablation {
            // Frames are encoded independently and their summaries averaged.
            let x = x.reshape((b * t, p, d))?;
            let cls = self.cls.reshape((1, 1, d))?.broadcast_as((b * t, 1, d))?;
            let mut h = Tensor::cat(&[&cls, &x], 1)?;
            for layer in &self.layers {
                h = layer.forward(&h, None)?;
            }
            let h = self.ln.forward(&h)?.reshape((b, t, p + 1, d))?;
            let cls = h.i((.., .., 0))?.mean_keepdim(1)?;
            let tokens = h.narrow(2, 1, p)?.reshape((b, t * p, d))?;
            return Tensor::cat(&[&cls, &tokens], 1);
        }
        let x = x.broadcast_add(&self.temporal_pos.reshape((t, 1, d))?)?;
        let x = x.reshape((b, t * p, d))?;
        let cls = self.cls.reshape((1, 1, d))?.broadcast_as((b, 1, d))?;
        let mut h = Tensor::cat(&[&cls, &x], 1)?;
        for layer in &self.layers {
            h = layer.forward(&h, None)?;
        }
        self.ln.forward(&h)
    }
}

/// Lexicographic frame order used to make the ablation encoder's input
/// independent of the order frames arrive in.
fn canonical_order(frames: &Frames) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frames.t).collect();
    order.sort_by(|&a, &b| {
        frames
            .frame(a)
            .iter()
            .zip(frames.frame(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Rearranges frames into `[B, T, P, C*p*p]` patch rows (patches row-major, each
/// patch laid out channel, row, column).
pub(crate) fn patchify(videos: &[&Frames], cfg: &ModelConfig) -> Result<(Vec<f32>, (usize, usize, usize, usize))> {
    let (t, c, h, w, ps) = (
        cfg.frames,
        cfg.channels,
        cfg.frame_height,
        cfg.frame_width,
        cfg.patch_size,
    );
    let (gh, gw) = (h / ps, w / ps);
    let pdim = cfg.patch_dim();
    let mut out = Vec::with_capacity(videos.len() * t * gh * gw * pdim);
    for (i, v) in videos.iter().enumerate() {
        if (v.t, v.c, v.h, v.w) != (t, c, h, w) {
            return Err(Error::contract(format!(
                "video {i} has shape {}x{}x{}x{}, model expects {t}x{c}x{h}x{w}",
                v.t, v.c, v.h, v.w
            )));
        }
        let order: Vec<usize> = if cfg.order_invariant_ablation {
            canonical_order(v)
        } else {
            (0..t).collect()
        };
        for &f in &order {
            let frame = v.frame(f);
            for py in 0..gh {
                for px in 0..gw {
                    for ch in 0..c {
                        for dy in 0..ps {
                            let row = (ch * h + py * ps + dy) * w + px * ps;
                            out.extend_from_slice(&frame[row..row + ps]);
                        }
                    }
                }
            }
        }
    }
    Ok((out, (videos.len(), t, gh * gw, pdim)))
}
