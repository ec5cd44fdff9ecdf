//! Pre-training objectives and their combination into one loss.

mod lm;
mod mining;
mod mtre;
mod vtc;
mod vtm;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

pub use lm::{
    corrupt_for_mlm, mlm_loss_from_logits, pad_rows, prefix_loss_from_logits, split_prefix, split_prefix_at,
    MlmCorruption, PrefixSplit,
};
pub use mining::{cme_loss, content_rows, mine_batch, mine_positive_words, PositiveWordSet};
pub use mtre::{mtre_loss, negative_cosine, symmetric_negative_cosine};
pub use vtc::{vtc_loss, NegativeQueue};
pub use vtm::{sample_negatives, vtm_loss_from_logits};

use crate::corpus::{Frames, TokenizedText, VideoClip, Vocab};
use crate::error::{Error, Result};
use crate::model::{HiteaModel, Memory, TextInput, VideoEmbeddings};
use crate::rng::Rng;
use crate::views::{make_view_pair, ViewConfig};

/// Which loss terms enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFlags {
    pub vtc: bool,
    pub vtm: bool,
    pub mlm: bool,
    pub prefix_lm: bool,
    pub cme: bool,
    pub mtre: bool,
}

pub const LOSS_NAMES: [&str; 6] = ["vtc", "vtm", "mlm", "prefix_lm", "cme", "mtre"];

impl LossFlags {
    pub const NONE: LossFlags = LossFlags {
        vtc: false,
        vtm: false,
        mlm: false,
        prefix_lm: false,
        cme: false,
        mtre: false,
    };

    pub const BASE: LossFlags = LossFlags {
        vtc: true,
        vtm: true,
        mlm: true,
        prefix_lm: true,
        ..LossFlags::NONE
    };

    pub const ALL: LossFlags = LossFlags {
        cme: true,
        mtre: true,
        ..LossFlags::BASE
    };

    pub const RETRIEVAL: LossFlags = LossFlags {
        vtc: true,
        vtm: true,
        ..LossFlags::NONE
    };

    /// Parses a comma list of loss names; `base` expands to vtc, vtm, mlm, prefix_lm.
    pub fn parse(list: &str) -> Result<LossFlags> {
        let mut flags = LossFlags::NONE;
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "base" => {
                    flags.vtc = true;
                    flags.vtm = true;
                    flags.mlm = true;
                    flags.prefix_lm = true;
                }
                _ => {
                    *flags.slot(name).ok_or_else(|| {
                        Error::config(
                            "losses",
                            format!("unknown loss `{name}`; valid names: base, {}", LOSS_NAMES.join(", ")),
                        )
                    })? = true
                }
            }
        }
        if flags == LossFlags::NONE {
            return Err(Error::config("losses", "no loss enabled"));
        }
        Ok(flags)
    }

    fn slot(&mut self, name: &str) -> Option<&mut bool> {
        Some(match name {
            "vtc" => &mut self.vtc,
            "vtm" => &mut self.vtm,
            "mlm" => &mut self.mlm,
            "prefix_lm" => &mut self.prefix_lm,
            "cme" => &mut self.cme,
            "mtre" => &mut self.mtre,
            _ => return None,
        })
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        let mut copy = *self;
        LOSS_NAMES
            .into_iter()
            .filter(|n| *copy.slot(n).expect("known name"))
            .collect()
    }

    pub fn needs_short_view(&self) -> bool {
        self.cme || self.mtre
    }

    pub fn needs_pairs(&self) -> bool {
        self.vtc || self.vtm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    /// Number of mined positive words K.
    pub k: usize,
    pub tau_init: f64,
    pub mask_ratio: f64,
    /// Negative-queue size. Queued features come from the live encoders, so
    /// large queues go stale and collapse the contrastive loss.
    pub queue_capacity: usize,
    pub losses: LossFlags,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            k: 5,
            tau_init: 0.07,
            mask_ratio: 0.15,
            queue_capacity: 16,
            losses: LossFlags::ALL,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return Err(Error::config("tau_init", "must be positive"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio <= 1.0) {
            return Err(Error::config("mask_ratio", "must lie in (0, 1]"));
        }
        if self.losses == LossFlags::NONE {
            return Err(Error::config("losses", "no loss enabled"));
        }
        Ok(())
    }
}

/// Scalar value of every term; disabled terms are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBundle {
    pub cme: f64,
    pub mtre: f64,
    pub vtc: f64,
    pub vtm: f64,
    pub mlm: f64,
    pub prefix_lm: f64,
    pub total: f64,
}

impl LossBundle {
    pub fn terms(&self) -> [(&'static str, f64); 6] {
        [
            ("vtc", self.vtc),
            ("vtm", self.vtm),
            ("mlm", self.mlm),
            ("prefix_lm", self.prefix_lm),
            ("cme", self.cme),
            ("mtre", self.mtre),
        ]
    }

    /// Sum of the terms in the fixed order vtc, vtm, mlm, prefix_lm, cme, mtre.
    pub fn sum_of_terms(&self) -> f64 {
        self.terms().iter().map(|(_, v)| v).sum()
    }

    /// First non-finite term (or the total), if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        self.terms()
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
            .or((!self.total.is_finite()).then_some("total"))
    }
}

/// One training batch: two views of each clip plus its caption.
#[derive(Debug, Clone)]
pub struct Batch {
    pub ids: Vec<String>,
    pub captions: Vec<String>,
    pub texts: Vec<TokenizedText>,
    pub long: Vec<Frames>,
    pub short: Vec<Frames>,
}

impl Batch {
    /// Draws view pairs in clip order from `rng`.
    pub fn from_clips(clips: &[&VideoClip], vocab: &Vocab, views: &ViewConfig, rng: &mut Rng) -> Result<Batch> {
        let mut batch = Batch {
            ids: Vec::new(),
            captions: Vec::new(),
            texts: Vec::new(),
            long: Vec::new(),
            short: Vec::new(),
        };
        for clip in clips {
            let pair = make_view_pair(clip, views, rng)?;
            batch.ids.push(clip.id.clone());
            batch.captions.push(clip.caption.clone());
            batch.texts.push(crate::corpus::tokenize(&clip.caption, vocab)?);
            batch.long.push(pair.long_frames);
            batch.short.push(pair.short_frames);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Differentiable total plus the per-term values.
pub struct LossOutput {
    pub total: Tensor,
    pub bundle: LossBundle,
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Fusion requests gathered so the fusion encoder runs once per step.
struct FusionPlan {
    videos: Vec<VideoEmbeddings>,
    texts: Vec<TextInput>,
    offsets: Vec<usize>,
    rows: usize,
}

impl FusionPlan {
    fn new() -> Self {
        FusionPlan {
            videos: Vec::new(),
            texts: Vec::new(),
            offsets: Vec::new(),
            rows: 0,
        }
    }

    fn add(&mut self, video: VideoEmbeddings, text: TextInput) -> usize {
        let slot = self.offsets.len();
        self.offsets.push(self.rows);
        self.rows += video.batch();
        self.videos.push(video);
        self.texts.push(text);
        slot
    }

    fn run(self, model: &HiteaModel) -> Result<FusedGroups> {
        if self.videos.is_empty() {
            return Ok(FusedGroups {
                fused: None,
                offsets: vec![],
                sizes: vec![],
            });
        }
        let sizes: Vec<usize> = self.videos.iter().map(VideoEmbeddings::batch).collect();
        let video = VideoEmbeddings::concat(&self.videos.iter().collect::<Vec<_>>())?;
        let text = TextInput::concat(&self.texts.iter().collect::<Vec<_>>())?;
        Ok(FusedGroups {
            fused: Some(model.fuse(&video, &text)?),
            offsets: self.offsets,
            sizes,
        })
    }
}

struct FusedGroups {
    fused: Option<crate::model::FusedEmbeddings>,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl FusedGroups {
    fn seq(&self, slot: usize) -> Result<Tensor> {
        let f = self.fused.as_ref().expect("planned");
        Ok(f.seq.narrow(0, self.offsets[slot], self.sizes[slot])?)
    }

    fn video_cls(&self, slot: usize) -> Result<Tensor> {
        Ok(self.seq(slot)?.narrow(1, 0, 1)?.squeeze(1)?)
    }

    fn text(&self, slot: usize) -> Result<Tensor> {
        let f = self.fused.as_ref().expect("planned");
        let lt = f.seq.dim(1)? - f.video_len;
        Ok(self.seq(slot)?.narrow(1, f.video_len, lt)?)
    }

    fn memory(&self, slot: usize) -> Result<Memory> {
        let f = self.fused.as_ref().expect("planned");
        let rows: Vec<usize> = (self.offsets[slot]..self.offsets[slot] + self.sizes[slot]).collect();
        f.memory()?.select(&rows)
    }
}

/// Computes every enabled objective on `batch` and then pushes the batch's
/// contrastive features into `queue`.
///
/// Random draws happen in a fixed order: masking per item, prefix split per
/// item, then matching negatives for texts and for videos.
pub fn total_loss(
    model: &HiteaModel,
    batch: &Batch,
    config: &ObjectiveConfig,
    queue: &mut NegativeQueue,
    rng: &mut Rng,
) -> Result<LossOutput> {
    let flags = config.losses;
    let b = batch.len();
    if b == 0 {
        return Err(Error::contract("empty batch"));
    }
    if (flags.vtm || flags.vtc) && b < 2 {
        return Err(Error::contract(
            "contrastive and matching losses need a batch of at least 2",
        ));
    }
    let vocab_size = model.config().vocab_size;

    // Unimodal encoders, one call each.
    let mut frames: Vec<&Frames> = batch.long.iter().collect();
    if flags.needs_short_view() {
        frames.extend(batch.short.iter());
    }
    let video = model.encode_video(&frames)?;
    let long: Vec<usize> = (0..b).collect();
    let long_v = video.select(&long)?;

    let mlm: Vec<MlmCorruption> = if flags.mlm {
        batch
            .texts
            .iter()
            .map(|t| corrupt_for_mlm(t, vocab_size, config.mask_ratio, rng))
            .collect::<Result<_>>()?
    } else {
        vec![]
    };
    let prefix: Vec<PrefixSplit> = if flags.prefix_lm {
        batch
            .texts
            .iter()
            .map(|t| split_prefix(t, rng))
            .collect::<Result<_>>()?
    } else {
        vec![]
    };
    let mut texts: Vec<&TokenizedText> = batch.texts.iter().collect();
    texts.extend(mlm.iter().map(|c| &c.text));
    texts.extend(prefix.iter().map(|p| &p.prefix));
    let text_all = model.encode_text(&texts)?;
    let caption = text_all.select(&long)?;

    let zero = || -> Result<Tensor> { Ok(Tensor::zeros((), model.dtype(), &candle_core::Device::Cpu)?) };
    let mut plan = FusionPlan::new();

    // Contrastive features and similarity for negative mining.
    let need_features = flags.vtc || flags.vtm;
    let features = if need_features {
        Some((
            model.video_feature(&long_v.cls()?)?,
            model.text_feature(&caption.cls()?)?,
        ))
    } else {
        None
    };

    let full_text = caption.full()?;
    let long_full_slot = (flags.vtm || flags.mtre).then(|| plan.add(long_v.clone(), full_text.clone()));

    // Mining on the short view; shared by CME and the short-view fusion input.
    let mut cme = zero()?;
    let mut short_slot = None;
    if flags.needs_short_view() {
        let short_v = video.select(&(b..2 * b).collect::<Vec<_>>())?;
        let short_cls = short_v.cls()?;
        let words = content_rows(&caption.seq, &caption.content)?;
        let sets = mine_batch(&short_cls, &words, &caption.content, config.k)?;
        if flags.cme {
            cme = cme_loss(&short_cls, &words, &caption.content, &sets, &model.cme_tau()?)?;
        }
        if flags.mtre {
            let picks: Vec<Vec<usize>> = sets.iter().map(|s| s.indices.clone()).collect();
            short_slot = Some(plan.add(short_v, caption.subset(&picks)?));
        }
    }

    let mlm_slot = if flags.mlm {
        let rows: Vec<usize> = (b..2 * b).collect();
        Some(plan.add(long_v.clone(), text_all.select(&rows)?.full()?))
    } else {
        None
    };
    let prefix_slot = if flags.prefix_lm {
        let start = if flags.mlm { 2 * b } else { b };
        let rows: Vec<usize> = (start..start + b).collect();
        Some(plan.add(long_v.clone(), text_all.select(&rows)?.full()?))
    } else {
        None
    };

    let mut vtm_slots = None;
    if flags.vtm {
        let (vf, tf) = features.as_ref().expect("features computed");
        let sim: Vec<Vec<f64>> = vf.matmul(&tf.t()?)?.detach().to_dtype(DType::F64)?.to_vec2()?;
        let sim_t: Vec<Vec<f64>> = (0..b).map(|j| (0..b).map(|i| sim[i][j]).collect()).collect();
        let tau = scalar(&model.vtc_tau()?)?;
        let caps: Vec<&str> = batch.captions.iter().map(String::as_str).collect();
        let neg_text = sample_negatives(&sim, tau, &caps, rng)?;
        let neg_video = sample_negatives(&sim_t, tau, &caps, rng)?;
        let a = plan.add(long_v.clone(), caption.select(&neg_text)?.full()?);
        let c = plan.add(long_v.select(&neg_video)?, full_text.clone());
        vtm_slots = Some((a, c));
    }

    let fused = plan.run(model)?;

    let vtc = match (&features, flags.vtc) {
        (Some((vf, tf)), true) => vtc_loss(vf, tf, &model.vtc_tau()?, queue, &batch.ids)?,
        _ => zero()?,
    };

    let vtm = match vtm_slots {
        Some((neg_t, neg_v)) => {
            let pos = long_full_slot.expect("planned with vtm");
            let cls = Tensor::cat(
                &[fused.video_cls(pos)?, fused.video_cls(neg_t)?, fused.video_cls(neg_v)?],
                0,
            )?;
            let mut labels = vec![1u32; b];
            labels.extend(std::iter::repeat_n(0, 2 * b));
            vtm_loss_from_logits(&model.vtm_logits(&cls)?, &labels)?
        }
        None => zero()?,
    };

    let mtre = match short_slot {
        Some(s) => mtre_loss(
            &fused.video_cls(s)?,
            &fused.video_cls(long_full_slot.expect("planned with mtre"))?,
            model.heads(),
        )?,
        None => zero()?,
    };

    let mlm_term = match mlm_slot {
        Some(s) => mlm_loss_from_logits(&model.mlm_logits(&fused.text(s)?)?, &mlm)?,
        None => zero()?,
    };

    let prefix_term = match prefix_slot {
        Some(s) => {
            let rows = pad_rows(&prefix.iter().map(|p| p.decoder_input.clone()).collect::<Vec<_>>());
            let logits = model.decode(&fused.memory(s)?, &rows)?;
            prefix_loss_from_logits(&logits, &prefix)?
        }
        None => zero()?,
    };

    let terms = [
        (flags.vtc, &vtc),
        (flags.vtm, &vtm),
        (flags.mlm, &mlm_term),
        (flags.prefix_lm, &prefix_term),
        (flags.cme, &cme),
        (flags.mtre, &mtre),
    ];
    let mut total = zero()?;
    for (on, t) in terms {
        if on {
            total = (total + t)?;
        }
    }
    let bundle = LossBundle {
        vtc: scalar(&vtc)?,
        vtm: scalar(&vtm)?,
        mlm: scalar(&mlm_term)?,
        prefix_lm: scalar(&prefix_term)?,
        cme: scalar(&cme)?,
        mtre: scalar(&mtre)?,
        total: scalar(&total)?,
    };
    if let (Some((vf, tf)), true) = (&features, flags.vtc) {
        queue.enqueue(&batch.ids, vf, tf)?;
    }
    Ok(LossOutput { total, bundle })
}
