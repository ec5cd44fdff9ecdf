//! Video encoder, text encoder, fusion encoder, text decoder and the
//! view-relation heads, all randomly initialised from a seed.

mod checkpoint;
mod decoder;
mod fusion;
mod heads;
pub mod layers;
pub mod params;
mod text;
mod video;

use candle_core::{DType, IndexOp, Tensor};
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT};
pub use heads::SiamHeads;
use layers::{key_bias, l2_normalize, Linear};
pub use params::ParamStore;

use crate::corpus::{Frames, TokenizedText};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub video_layers: usize,
    pub text_layers: usize,
    pub fusion_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    /// MLP hidden width as a multiple of `hidden_dim`.
    pub mlp_ratio: usize,
    pub patch_size: usize,
    /// Frames per view, T_s.
    pub frames: usize,
    pub channels: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub max_text_len: usize,
    pub vocab_size: usize,
    /// Width of the contrastive projection space.
    pub proj_dim: usize,
    /// Drops temporal position embeddings and cross-frame attention; frame
    /// summaries are mean-pooled, so the encoder ignores frame order.
    pub order_invariant_ablation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 64,
            video_layers: 2,
            text_layers: 2,
            fusion_layers: 2,
            decoder_layers: 2,
            heads: 4,
            mlp_ratio: 2,
            // One token per frame: the cheapest grid that still sees shape and position.
            patch_size: 16,
            frames: 8,
            channels: 1,
            frame_height: 16,
            frame_width: 16,
            max_text_len: 48,
            vocab_size: 36,
            proj_dim: 32,
            order_invariant_ablation: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("heads", self.heads),
            ("mlp_ratio", self.mlp_ratio),
            ("patch_size", self.patch_size),
            ("frames", self.frames),
            ("channels", self.channels),
            ("proj_dim", self.proj_dim),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(Error::config(
                "heads",
                format!("{} does not divide hidden_dim {}", self.heads, self.hidden_dim),
            ));
        }
        if self.hidden_dim < 4 {
            return Err(Error::config(
                "hidden_dim",
                "must be at least 4 for the prediction bottleneck",
            ));
        }
        if !self.frame_height.is_multiple_of(self.patch_size)
            || !self.frame_width.is_multiple_of(self.patch_size)
            || self.frame_height == 0
            || self.frame_width == 0
        {
            return Err(Error::config(
                "patch_size",
                format!(
                    "{} must divide frame size {}x{}",
                    self.patch_size, self.frame_height, self.frame_width
                ),
            ));
        }
        if self.max_text_len < 3 {
            return Err(Error::config("max_text_len", "must fit [CLS], one word and [SEP]"));
        }
        if self.vocab_size <= 4 {
            return Err(Error::config("vocab_size", "must exceed the four special tokens"));
        }
        Ok(())
    }

    pub fn patches_per_frame(&self) -> usize {
        (self.frame_height / self.patch_size) * (self.frame_width / self.patch_size)
    }

    /// M, the number of flattened space-time patch tokens.
    pub fn num_video_tokens(&self) -> usize {
        self.frames * self.patches_per_frame()
    }

    pub(crate) fn patch_dim(&self) -> usize {
        self.channels * self.patch_size * self.patch_size
    }

    pub(crate) fn mlp_hidden(&self) -> usize {
        self.hidden_dim * self.mlp_ratio
    }
}

/// `seq: [B, 1+M, D]`, the video `[CLS]` followed by patch tokens.
#[derive(Debug, Clone)]
pub struct VideoEmbeddings {
    pub seq: Tensor,
}

impl VideoEmbeddings {
    /// `[B, D]`
    pub fn cls(&self) -> Result<Tensor> {
        Ok(self.seq.i((.., 0))?)
    }

    /// `[B, M, D]`
    pub fn tokens(&self) -> Result<Tensor> {
        let m = self.seq.dim(1)? - 1;
        Ok(self.seq.narrow(1, 1, m)?)
    }

    pub fn num_tokens(&self) -> usize {
        self.seq.dims()[1] - 1
    }

    pub fn batch(&self) -> usize {
        self.seq.dims()[0]
    }

    pub fn select(&self, items: &[usize]) -> Result<VideoEmbeddings> {
        let idx = index_tensor(items, &self.seq)?;
        Ok(VideoEmbeddings {
            seq: self.seq.index_select(&idx, 0)?,
        })
    }

    pub fn concat(parts: &[&VideoEmbeddings]) -> Result<VideoEmbeddings> {
        let seqs: Vec<&Tensor> = parts.iter().map(|p| &p.seq).collect();
        Ok(VideoEmbeddings {
            seq: Tensor::cat(&seqs, 0)?,
        })
    }
}

/// Text-encoder output over padded rows `[B, L, D]`.
///
/// Row `i` holds `[CLS]` at position 0 and its `content[i]` words at
/// positions `1..=content[i]`; positions from `valid[i]` on are padding.
#[derive(Debug, Clone)]
pub struct TextEmbeddings {
    pub seq: Tensor,
    pub content: Vec<usize>,
    pub valid: Vec<usize>,
}

impl TextEmbeddings {
    /// `[B, D]`
    pub fn cls(&self) -> Result<Tensor> {
        Ok(self.seq.i((.., 0))?)
    }

    /// Content-word rows of item `i`, `[N_i, D]`.
    pub fn words(&self, i: usize) -> Result<Tensor> {
        Ok(self.seq.i(i)?.narrow(0, 1, self.content[i])?)
    }

    /// `[CLS]` plus every content word, the fusion input for the full text.
    pub fn full(&self) -> Result<TextInput> {
        let width = self.content.iter().max().copied().unwrap_or(0) + 1;
        Ok(TextInput {
            seq: self.seq.narrow(1, 0, width)?,
            valid: self.content.iter().map(|n| n + 1).collect(),
        })
    }

    /// `[CLS]` plus the chosen content words (0-based word indices, kept in
    /// the given order) for every item.
    pub fn subset(&self, picks: &[Vec<usize>]) -> Result<TextInput> {
        let (b, l, d) = self.seq.dims3()?;
        if picks.len() != b {
            return Err(Error::contract(format!("{} word subsets for {b} texts", picks.len())));
        }
        let width = picks.iter().map(Vec::len).max().unwrap_or(0) + 1;
        let mut flat = Vec::with_capacity(b * width);
        for (i, p) in picks.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::contract(format!("empty word subset for item {i}")));
            }
            if let Some(&bad) = p.iter().find(|&&k| k >= self.content[i]) {
                return Err(Error::contract(format!("word {bad} out of range for item {i}")));
            }
            flat.push((i * l) as u32);
            flat.extend(p.iter().map(|&k| (i * l + 1 + k) as u32));
            flat.extend(std::iter::repeat_n((i * l) as u32, width - 1 - p.len()));
        }
        let idx = Tensor::from_vec(flat, b * width, self.seq.device())?;
        let seq = self
            .seq
            .reshape((b * l, d))?
            .index_select(&idx, 0)?
            .reshape((b, width, d))?;
        Ok(TextInput {
            seq,
            valid: picks.iter().map(|p| p.len() + 1).collect(),
        })
    }

    pub fn select(&self, items: &[usize]) -> Result<TextEmbeddings> {
        let idx = index_tensor(items, &self.seq)?;
        Ok(TextEmbeddings {
            seq: self.seq.index_select(&idx, 0)?,
            content: items.iter().map(|&i| self.content[i]).collect(),
            valid: items.iter().map(|&i| self.valid[i]).collect(),
        })
    }
}

/// Text positions handed to the fusion encoder: `[B, Lt, D]` with the first
/// `valid[i]` positions of row `i` in use.
#[derive(Debug, Clone)]
pub struct TextInput {
    pub seq: Tensor,
    pub valid: Vec<usize>,
}

impl TextInput {
    /// Stacks inputs along the batch, padding to the widest.
    pub fn concat(parts: &[&TextInput]) -> Result<TextInput> {
        let width = parts.iter().map(|p| p.seq.dims()[1]).max().unwrap_or(0);
        let mut seqs = Vec::with_capacity(parts.len());
        for p in parts {
            let (b, l, d) = p.seq.dims3()?;
            seqs.push(if l < width {
                Tensor::cat(
                    &[
                        &p.seq,
                        &Tensor::zeros((b, width - l, d), p.seq.dtype(), p.seq.device())?,
                    ],
                    1,
                )?
            } else {
                p.seq.clone()
            });
        }
        Ok(TextInput {
            seq: Tensor::cat(&seqs, 0)?,
            valid: parts.iter().flat_map(|p| p.valid.iter().copied()).collect(),
        })
    }
}

/// Fusion output `[B, 1+M+Lt, D]`: the text-guided video `[CLS]`, the video
/// patch tokens, then the fused text positions.
#[derive(Debug, Clone)]
pub struct FusedEmbeddings {
    pub seq: Tensor,
    pub video_len: usize,
    pub text_valid: Vec<usize>,
}

impl FusedEmbeddings {
    /// `[B, D]`
    pub fn video_cls(&self) -> Result<Tensor> {
        Ok(self.seq.i((.., 0))?)
    }

    /// Unpadded length of item `i`: M + |text| + 1.
    pub fn item_len(&self, i: usize) -> usize {
        self.video_len + self.text_valid[i]
    }

    /// Fused text positions, `[B, Lt, D]`.
    pub fn text(&self) -> Result<Tensor> {
        let lt = self.seq.dim(1)? - self.video_len;
        Ok(self.seq.narrow(1, self.video_len, lt)?)
    }

    pub fn memory(&self) -> Result<Memory> {
        let width = self.seq.dim(1)?;
        let lens: Vec<usize> = (0..self.text_valid.len()).map(|i| self.item_len(i)).collect();
        let bias = key_bias(&layers::prefix_valid(&lens, width), self.seq.dtype(), self.seq.device())?;
        Ok(Memory {
            seq: self.seq.clone(),
            bias: Some(bias),
        })
    }
}

/// Conditioning sequence for the decoder's cross-attention.
#[derive(Debug, Clone)]
pub struct Memory {
    pub seq: Tensor,
    pub bias: Option<Tensor>,
}

impl Memory {
    pub fn from_video(v: &VideoEmbeddings) -> Memory {
        Memory {
            seq: v.seq.clone(),
            bias: None,
        }
    }

    pub fn batch(&self) -> usize {
        self.seq.dims()[0]
    }

    /// Rows `items` of the memory, in that order (repeats allowed).
    pub fn select(&self, items: &[usize]) -> Result<Memory> {
        let idx = index_tensor(items, &self.seq)?;
        Ok(Memory {
            seq: self.seq.index_select(&idx, 0)?,
            bias: match &self.bias {
                Some(b) => Some(b.index_select(&idx, 0)?),
                None => None,
            },
        })
    }
}

fn index_tensor(items: &[usize], like: &Tensor) -> Result<Tensor> {
    let ids: Vec<u32> = items.iter().map(|&i| i as u32).collect();
    Ok(Tensor::from_vec(ids, items.len(), like.device())?)
}

pub struct HiteaModel {
    config: ModelConfig,
    store: ParamStore,
    video: video::VideoEncoder,
    text: text::TextEncoder,
    fusion: fusion::FusionEncoder,
    decoder: decoder::TextDecoder,
    siam: SiamHeads,
    vision_proj: Linear,
    text_proj: Linear,
    vtm_head: Linear,
    mlm_head: Linear,
    cme_log_tau: Tensor,
    vtc_log_tau: Tensor,
}

/// Initial value of both learnable temperatures.
pub const TAU_INIT: f64 = 0.07;

impl HiteaModel {
    pub fn new(config: ModelConfig, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(dtype, seed);
        let d = config.hidden_dim;
        let video = video::VideoEncoder::new(&mut store, &config)?;
        let text = text::TextEncoder::new(&mut store, &config)?;
        let fusion = fusion::FusionEncoder::new(&mut store, &config)?;
        let decoder = decoder::TextDecoder::new(&mut store, &config)?;
        let siam = SiamHeads::new(&mut store, d)?;
        let vision_proj = Linear::new(&mut store, "vision_proj", d, config.proj_dim)?;
        let text_proj = Linear::new(&mut store, "text_proj", d, config.proj_dim)?;
        let vtm_head = Linear::new(&mut store, "vtm_head", d, 2)?;
        let mlm_head = Linear::new(&mut store, "mlm_head", d, config.vocab_size)?;
        let cme_log_tau = store.constant("cme_log_tau", &[], TAU_INIT.ln())?;
        let vtc_log_tau = store.constant("vtc_log_tau", &[], TAU_INIT.ln())?;
        Ok(HiteaModel {
            config,
            store,
            video,
            text,
            fusion,
            decoder,
            siam,
            vision_proj,
            text_proj,
            vtm_head,
            mlm_head,
            cme_log_tau,
            vtc_log_tau,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    pub fn heads(&self) -> &SiamHeads {
        &self.siam
    }

    pub fn encode_video(&self, videos: &[&Frames]) -> Result<VideoEmbeddings> {
        if videos.is_empty() {
            return Err(Error::contract("empty video batch"));
        }
        let (data, shape) = video::patchify(videos, &self.config)?;
        let patches = Tensor::from_vec(data, shape, self.store.device())?.to_dtype(self.dtype())?;
        Ok(VideoEmbeddings {
            seq: self.video.forward(&patches)?,
        })
    }

    pub fn encode_text(&self, texts: &[&TokenizedText]) -> Result<TextEmbeddings> {
        if texts.is_empty() {
            return Err(Error::contract("empty text batch"));
        }
        let valid: Vec<usize> = texts
            .iter()
            .map(|t| t.token_ids.iter().rposition(|&id| id != 0).map_or(0, |p| p + 1))
            .collect();
        let width = *valid.iter().max().expect("non-empty");
        if width > self.config.max_text_len {
            return Err(Error::contract(format!(
                "text of {width} tokens exceeds max_text_len {}",
                self.config.max_text_len
            )));
        }
        let mut ids = Vec::with_capacity(texts.len() * width);
        for (t, &n) in texts.iter().zip(&valid) {
            if n == 0 || t.token_ids[0] != 1 {
                return Err(Error::contract("text must start with [CLS]"));
            }
            if let Some(&bad) = t.token_ids[..n]
                .iter()
                .find(|&&id| id as usize >= self.config.vocab_size)
            {
                return Err(Error::contract(format!("token id {bad} outside vocabulary")));
            }
            ids.extend_from_slice(&t.token_ids[..n]);
            ids.extend(std::iter::repeat_n(0u32, width - n));
        }
        let ids = Tensor::from_vec(ids, (texts.len(), width), self.store.device())?;
        Ok(TextEmbeddings {
            seq: self.text.forward(&ids, &valid)?,
            content: texts.iter().map(|t| t.n()).collect(),
            valid,
        })
    }

    pub fn fuse(&self, video: &VideoEmbeddings, text: &TextInput) -> Result<FusedEmbeddings> {
        let b = video.batch();
        let (tb, lt, _) = text.seq.dims3()?;
        if tb != b || text.valid.len() != b {
            return Err(Error::contract(format!("fusing {b} videos with {tb} texts")));
        }
        if let Some(i) = text.valid.iter().position(|&n| n == 0 || n > lt) {
            return Err(Error::contract(format!("item {i} has an empty text input")));
        }
        let m = video.num_tokens();
        let (dtype, dev) = (text.seq.dtype(), text.seq.device());
        let text_valid = layers::prefix_valid(&text.valid, lt);
        let text_bias = key_bias(&text_valid, dtype, dev)?;
        let context: Vec<Vec<bool>> = text_valid
            .iter()
            .map(|row| std::iter::repeat_n(true, m).chain(row.iter().copied()).collect())
            .collect();
        let context_bias = key_bias(&context, dtype, dev)?;
        Ok(FusedEmbeddings {
            seq: self.fusion.forward(&video.seq, &text.seq, &text_bias, &context_bias)?,
            video_len: m + 1,
            text_valid: text.valid.clone(),
        })
    }

    /// Next-token logits `[B, L, V]` for equal-length input rows.
    pub fn decode(&self, memory: &Memory, rows: &[Vec<u32>]) -> Result<Tensor> {
        let b = rows.len();
        if b != memory.batch() {
            return Err(Error::contract(format!(
                "{b} decoder rows for memory batch {}",
                memory.batch()
            )));
        }
        let l = rows.first().map_or(0, Vec::len);
        if l == 0 || rows.iter().any(|r| r.len() != l) {
            return Err(Error::contract("decoder rows must be non-empty and of equal length"));
        }
        if l >= self.config.max_text_len {
            return Err(Error::contract(format!(
                "prefix of {l} tokens is not below max_text_len {}",
                self.config.max_text_len
            )));
        }
        let flat: Vec<u32> = rows.iter().flatten().copied().collect();
        if let Some(&bad) = flat.iter().find(|&&id| id as usize >= self.config.vocab_size) {
            return Err(Error::contract(format!("token id {bad} outside vocabulary")));
        }
        let ids = Tensor::from_vec(flat, (b, l), self.store.device())?;
        Ok(self.decoder.forward(&ids, &memory.seq, memory.bias.as_ref())?)
    }

    pub fn project(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.siam.project(x)?)
    }

    pub fn predict(&self, z: &Tensor) -> Result<Tensor> {
        Ok(self.siam.predict(z)?)
    }

    /// Unit-norm contrastive embedding of video `[CLS]` vectors.
    pub fn video_feature(&self, cls: &Tensor) -> Result<Tensor> {
        Ok(l2_normalize(&self.vision_proj.forward(cls)?)?)
    }

    pub fn text_feature(&self, cls: &Tensor) -> Result<Tensor> {
        Ok(l2_normalize(&self.text_proj.forward(cls)?)?)
    }

    /// Matched/unmatched logits `[B, 2]` from fused video `[CLS]` vectors.
    pub fn vtm_logits(&self, fused_cls: &Tensor) -> Result<Tensor> {
        Ok(self.vtm_head.forward(fused_cls)?)
    }

    pub fn mlm_logits(&self, fused_text: &Tensor) -> Result<Tensor> {
        Ok(self.mlm_head.forward(fused_text)?)
    }

    pub fn cme_tau(&self) -> Result<Tensor> {
        Ok(self.cme_log_tau.exp()?)
    }

    pub fn vtc_tau(&self) -> Result<Tensor> {
        Ok(self.vtc_log_tau.exp()?)
    }

    /// Resets both learnable temperatures to `tau`.
    pub fn set_temperatures(&self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config("tau_init", "must be positive"));
        }
        for name in ["cme_log_tau", "vtc_log_tau"] {
            let var = self.store.get(name).expect("defined at construction");
            var.set(&Tensor::new(tau.ln(), self.store.device())?.to_dtype(self.dtype())?)?;
        }
        Ok(())
    }

    /// Zeroes the weights and biases of the output heads of the decoder and
    /// the masked-word predictor, making both emit uniform distributions.
    pub fn zero_output_heads(&self) -> Result<()> {
        for name in [
            "decoder.head.weight",
            "decoder.head.bias",
            "mlm_head.weight",
            "mlm_head.bias",
        ] {
            let var = self.store.get(name).expect("defined at construction");
            var.set(&var.zeros_like()?)?;
        }
        Ok(())
    }

    /// Sets the matching head to output zero logits.
    pub fn zero_vtm_head(&self) -> Result<()> {
        for name in ["vtm_head.weight", "vtm_head.bias"] {
            let var = self.store.get(name).expect("defined at construction");
            var.set(&var.zeros_like()?)?;
        }
        Ok(())
    }
}
