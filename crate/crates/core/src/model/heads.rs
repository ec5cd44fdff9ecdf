//! Projection (`g`) and prediction (`h`) heads for the view-relation objective.

use candle_core::Tensor;

use super::layers::{LayerNorm, Linear};
use super::params::ParamStore;
use crate::error::Result;

/// `g`: D -> D -> D with normalization and GELU in between.
/// `h`: D -> D/4 -> D bottleneck of the same form.
/// One instance serves both the long and the short branch.
pub struct SiamHeads {
    g1: Linear,
    g_ln: LayerNorm,
    g2: Linear,
    h1: Linear,
    h_ln: LayerNorm,
    h2: Linear,
}

impl SiamHeads {
    pub(crate) fn new(store: &mut ParamStore, dim: usize) -> Result<Self> {
        let bottleneck = dim / 4;
        Ok(SiamHeads {
            g1: Linear::new(store, "siam.g1", dim, dim)?,
            g_ln: LayerNorm::new(store, "siam.g_ln", dim)?,
            g2: Linear::new(store, "siam.g2", dim, dim)?,
            h1: Linear::new(store, "siam.h1", dim, bottleneck)?,
            h_ln: LayerNorm::new(store, "siam.h_ln", bottleneck)?,
            h2: Linear::new(store, "siam.h2", bottleneck, dim)?,
        })
    }

    pub fn project(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        self.g2.forward(&self.g_ln.forward(&self.g1.forward(x)?)?.gelu_erf()?)
    }

    pub fn predict(&self, z: &Tensor) -> candle_core::Result<Tensor> {
        self.h2.forward(&self.h_ln.forward(&self.h1.forward(z)?)?.gelu_erf()?)
    }

    pub fn bottleneck_width(&self) -> usize {
        self.h1.out_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.g2.out_dim()
    }
}
