//! Symmetrized negative-cosine alignment of the two views' fused summaries.

use candle_core::{DType, Tensor, D};

use crate::error::{Error, Result};
use crate::model::SiamHeads;

/// Per-row `-cos(p, z)` with `z` treated as a constant, `[B]`.
pub fn negative_cosine(p: &Tensor, z: &Tensor) -> Result<Tensor> {
    let z = z.detach();
    let pn = p.sqr()?.sum(D::Minus1)?.sqrt()?;
    let zn = z.sqr()?.sum(D::Minus1)?.sqrt()?;
    let min_norm = pn
        .min(0)?
        .minimum(&zn.min(0)?)?
        .to_dtype(DType::F64)?
        .to_scalar::<f64>()?;
    if min_norm <= 0.0 {
        return Err(Error::contract("negative cosine of a zero-norm vector"));
    }
    let dot = (p * &z)?.sum(D::Minus1)?;
    Ok((dot / (pn * zn)?)?.neg()?)
}

/// `½[D(p_long, sg(z_short)) + D(p_short, sg(z_long))]`, averaged over the batch.
pub fn symmetric_negative_cosine(
    p_long: &Tensor,
    z_short: &Tensor,
    p_short: &Tensor,
    z_long: &Tensor,
) -> Result<Tensor> {
    let a = negative_cosine(p_long, z_short)?.mean_all()?;
    let b = negative_cosine(p_short, z_long)?.mean_all()?;
    Ok(((a + b)? * 0.5)?)
}

/// Both summaries go through the shared projection `g`; predictions `h(g(.))`
/// are aligned to the other branch's detached projection.
pub fn mtre_loss(fused_short_cls: &Tensor, fused_long_cls: &Tensor, heads: &SiamHeads) -> Result<Tensor> {
    let z_long = heads.project(fused_long_cls)?;
    let z_short = heads.project(fused_short_cls)?;
    let p_long = heads.predict(&z_long)?;
    let p_short = heads.predict(&z_short)?;
    symmetric_negative_cosine(&p_long, &z_short, &p_short, &z_long)
}
