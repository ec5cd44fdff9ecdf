//! Central finite-difference checks of backpropagated gradients, plus a
//! micro problem small enough to check every objective in seconds.

use candle_core::{DType, Tensor};
use rand::Rng as _;
use serde::Serialize;

use crate::corpus::{tokenize, Frames, Vocab};
use crate::error::{Error, Result};
use crate::model::{HiteaModel, ModelConfig};
use crate::objectives::{
    content_rows, mine_batch, symmetric_negative_cosine, total_loss, Batch, LossFlags, NegativeQueue, ObjectiveConfig,
};
use crate::rng::{rng_from, Rng};

/// Denominator floor for the relative error, so that gradients that are
/// numerically zero compare on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub loss: f64,
    pub coordinates: usize,
    /// Coordinates whose analytic gradient is non-zero.
    pub nonzero: usize,
    pub max_rel_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
}

/// Compares `loss.backward()` against `(f(θ+ε) − f(θ−ε)) / 2ε` on up to
/// `per_param` random coordinates of every parameter. The model must be
/// `f64`; parameters are restored afterwards.
pub fn check_gradients<F>(model: &HiteaModel, f: F, per_param: usize, eps: f64, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&HiteaModel) -> Result<Tensor>,
{
    check_gradients_split(model, &f, &f, per_param, eps, seed)
}

/// As [`check_gradients`], with the backpropagated loss and the
/// finite-differenced function given separately. Used where the loss stops
/// gradients: `numeric` then holds the stopped branch fixed at its current value.
pub fn check_gradients_split<A, F>(
    model: &HiteaModel,
    analytic: A,
    f: F,
    per_param: usize,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    A: Fn(&HiteaModel) -> Result<Tensor>,
    F: Fn(&HiteaModel) -> Result<Tensor>,
{
    if model.dtype() != DType::F64 {
        return Err(Error::contract("gradient checks need a 64-bit model"));
    }
    let loss = analytic(model)?;
    let grads = loss.backward()?;
    let mut rng = rng_from(seed);
    let mut report = GradCheckReport {
        loss: loss.to_scalar::<f64>()?,
        coordinates: 0,
        nonzero: 0,
        max_rel_error: 0.0,
        worst: String::new(),
    };
    for (name, var) in model.params().named() {
        let shape = var.dims().to_vec();
        let values: Vec<f64> = var.as_tensor().flatten_all()?.to_vec1()?;
        let device = var.device().clone();
        let backprop: Vec<f64> = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all()?.to_vec1()?,
            None => vec![0.0; values.len()],
        };
        let picks: Vec<usize> = if values.len() <= per_param {
            (0..values.len()).collect()
        } else {
            (0..per_param).map(|_| rng.gen_range(0..values.len())).collect()
        };
        for i in picks {
            let eval_at = |x: f64| -> Result<f64> {
                let mut v = values.clone();
                v[i] = x;
                var.set(&Tensor::from_vec(v, shape.as_slice(), &device)?)?;
                Ok(f(model)?.to_scalar::<f64>()?)
            };
            let plus = eval_at(values[i] + eps)?;
            let minus = eval_at(values[i] - eps)?;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = backprop[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            report.coordinates += 1;
            report.nonzero += usize::from(a != 0.0);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = format!("{name}[{i}]");
            }
        }
        var.set(&Tensor::from_vec(values, shape.as_slice(), &device)?)?;
    }
    Ok(report)
}

/// Model configuration of the micro problem: D=8, two frames per view.
pub fn micro_config(vocab: &Vocab) -> ModelConfig {
    ModelConfig {
        hidden_dim: 8,
        video_layers: 1,
        text_layers: 1,
        fusion_layers: 1,
        decoder_layers: 1,
        heads: 2,
        mlp_ratio: 2,
        patch_size: 2,
        frames: 2,
        channels: 1,
        frame_height: 4,
        frame_width: 4,
        max_text_len: 8,
        vocab_size: vocab.len(),
        proj_dim: 4,
        order_invariant_ablation: false,
    }
}

/// Two clips with random frames and captions of four and three words.
pub fn micro_batch(vocab: &Vocab, seed: u64) -> Result<Batch> {
    let mut rng = rng_from(seed);
    let frames = |rng: &mut Rng| {
        let mut f = Frames::zeros(2, 1, 4, 4);
        f.data.iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
        f
    };
    let captions = ["dim square moves left", "bright bar blinks"];
    Ok(Batch {
        ids: vec!["m0".into(), "m1".into()],
        captions: captions.iter().map(|c| c.to_string()).collect(),
        texts: captions.iter().map(|c| tokenize(c, vocab)).collect::<Result<_>>()?,
        long: vec![frames(&mut rng), frames(&mut rng)],
        short: vec![frames(&mut rng), frames(&mut rng)],
    })
}

/// Loss of one objective on the micro problem. Randomness (masking, prefix
/// split, matching negatives) is replayed from `seed` on every call, and the
/// contrastive queue holds two foreign entries.
pub fn micro_objective(model: &HiteaModel, batch: &Batch, objective: &str, seed: u64) -> Result<Tensor> {
    let losses = LossFlags::parse(objective)?;
    let config = ObjectiveConfig {
        k: MICRO_K,
        mask_ratio: 0.6,
        queue_capacity: 4,
        losses,
        ..ObjectiveConfig::default()
    };
    let mut queue = NegativeQueue::new(config.queue_capacity);
    let proj = model.config().proj_dim;
    let row = |phase: f64| -> Vec<f64> {
        let v: Vec<f64> = (0..proj).map(|j| (phase + j as f64).sin()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    };
    let foreign = |a: f64, b: f64| Tensor::from_vec([row(a), row(b)].concat(), (2, proj), &candle_core::Device::Cpu);
    queue.enqueue(
        &["q0".to_string(), "q1".to_string()],
        &foreign(0.3, 1.7)?,
        &foreign(2.9, 4.1)?,
    )?;
    let mut rng = rng_from(seed);
    Ok(total_loss(model, batch, &config, &mut queue, &mut rng)?.total)
}

/// Micro-problem K, shared by [`micro_objective`] and [`micro_fused_cls`].
pub const MICRO_K: usize = 2;

/// Fused video `[CLS]` of the short view with its mined words and of the
/// long view with the full caption, `([B, D], [B, D])`.
pub fn micro_fused_cls(model: &HiteaModel, batch: &Batch) -> Result<(Tensor, Tensor)> {
    let b = batch.len();
    let frames: Vec<&Frames> = batch.long.iter().chain(&batch.short).collect();
    let video = model.encode_video(&frames)?;
    let long = video.select(&(0..b).collect::<Vec<_>>())?;
    let short = video.select(&(b..2 * b).collect::<Vec<_>>())?;
    let caption = model.encode_text(&batch.texts.iter().collect::<Vec<_>>())?;
    let words = content_rows(&caption.seq, &caption.content)?;
    let sets = mine_batch(&short.cls()?, &words, &caption.content, MICRO_K)?;
    let picks: Vec<Vec<usize>> = sets.into_iter().map(|s| s.indices).collect();
    let fused_short = model.fuse(&short, &caption.subset(&picks)?)?.video_cls()?;
    let fused_long = model.fuse(&long, &caption.full()?)?.video_cls()?;
    Ok((fused_short, fused_long))
}

/// Projections `(z_short, z_long)` of the micro problem's fused summaries.
pub fn micro_mtre_targets(model: &HiteaModel, batch: &Batch) -> Result<(Tensor, Tensor)> {
    let (s, l) = micro_fused_cls(model, batch)?;
    Ok((model.project(&s)?.detach(), model.project(&l)?.detach()))
}

/// The temporal-reliance loss with its stop-gradient targets held at `targets`.
pub fn micro_mtre_frozen(model: &HiteaModel, batch: &Batch, targets: &(Tensor, Tensor)) -> Result<Tensor> {
    let (s, l) = micro_fused_cls(model, batch)?;
    let p_short = model.predict(&model.project(&s)?)?;
    let p_long = model.predict(&model.project(&l)?)?;
    symmetric_negative_cosine(&p_long, &targets.0, &p_short, &targets.1)
}
