//! Transformer building blocks composed from differentiable tensor ops.
//!
//! Softmax and layer norm are written out from elementwise ops so that
//! backpropagation works for both `f32` and `f64` models.

use candle_core::{DType, Device, Tensor, D};

use super::params::ParamStore;
use crate::error::Result;

/// Additive attention bias for masked keys. Large enough that `exp` underflows to zero.
pub(crate) const MASK_BIAS: f64 = -1e9;

pub(crate) const INIT_STD: f64 = 0.02;

pub fn softmax_last(x: &Tensor) -> candle_core::Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    e.broadcast_div(&e.sum_keepdim(D::Minus1)?)
}

pub fn log_softmax_last(x: &Tensor) -> candle_core::Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let shifted = x.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    shifted.broadcast_sub(&lse)
}

/// Row-wise L2 normalization of the last dimension.
pub fn l2_normalize(x: &Tensor) -> candle_core::Result<Tensor> {
    let norm = x.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?;
    x.broadcast_div(&norm)
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub(crate) weight: Tensor,
    pub(crate) bias: Option<Tensor>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) -> Result<Self> {
        let weight = store.normal(&format!("{name}.weight"), &[fan_out, fan_in], INIT_STD)?;
        let bias = store.constant(&format!("{name}.bias"), &[fan_out], 0.0)?;
        Ok(Linear {
            weight,
            bias: Some(bias),
        })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        let dims = x.dims().to_vec();
        let fan_in = *dims.last().expect("rank >= 1");
        let flat = x.reshape(((), fan_in))?;
        let mut y = flat.matmul(&self.weight.t()?)?;
        if let Some(b) = &self.bias {
            y = y.broadcast_add(b)?;
        }
        let mut out = dims;
        *out.last_mut().expect("rank >= 1") = self.out_dim();
        y.reshape(out)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    gamma: Tensor,
    beta: Tensor,
}

impl LayerNorm {
    const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            gamma: store.constant(&format!("{name}.gamma"), &[dim], 1.0)?,
            beta: store.constant(&format!("{name}.beta"), &[dim], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + Self::EPS)?.sqrt()?)?;
        normed.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    fc1: Linear,
    fc2: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, hidden: usize) -> Result<Self> {
        Ok(Mlp {
            fc1: Linear::new(store, &format!("{name}.fc1"), dim, hidden)?,
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, dim)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(x)?.gelu_erf()?)
    }
}

/// Multi-head scaled dot-product attention with separate query and key/value inputs.
#[derive(Debug, Clone)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

impl Attention {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize) -> Result<Self> {
        Ok(Attention {
            q: Linear::new(store, &format!("{name}.q"), dim, dim)?,
            k: Linear::new(store, &format!("{name}.k"), dim, dim)?,
            v: Linear::new(store, &format!("{name}.v"), dim, dim)?,
            o: Linear::new(store, &format!("{name}.o"), dim, dim)?,
            heads,
        })
    }

    /// `query: [B, Lq, D]`, `kv: [B, Lk, D]`, `bias` broadcastable to `[B, H, Lq, Lk]`.
    pub fn forward(&self, query: &Tensor, kv: &Tensor, bias: Option<&Tensor>) -> candle_core::Result<Tensor> {
        let (b, lq, d) = query.dims3()?;
        let lk = kv.dim(1)?;
        let dh = d / self.heads;
        let split = |x: Tensor, l: usize| -> candle_core::Result<Tensor> {
            x.reshape((b, l, self.heads, dh))?.transpose(1, 2)?.contiguous()
        };
        let q = split(self.q.forward(query)?, lq)?;
        let k = split(self.k.forward(kv)?, lk)?;
        let v = split(self.v.forward(kv)?, lk)?;
        let mut scores = (q.matmul(&k.t()?)? * (1.0 / (dh as f64).sqrt()))?;
        if let Some(bias) = bias {
            scores = scores.broadcast_add(bias)?;
        }
        let probs = softmax_last(&scores)?;
        let out = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, lq, d))?;
        self.o.forward(&out)
    }
}

/// Pre-norm self-attention block.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    ln1: LayerNorm,
    attn: Attention,
    ln2: LayerNorm,
    mlp: Mlp,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, hidden: usize) -> Result<Self> {
        Ok(EncoderLayer {
            ln1: LayerNorm::new(store, &format!("{name}.ln1"), dim)?,
            attn: Attention::new(store, &format!("{name}.attn"), dim, heads)?,
            ln2: LayerNorm::new(store, &format!("{name}.ln2"), dim)?,
            mlp: Mlp::new(store, &format!("{name}.mlp"), dim, hidden)?,
        })
    }

    pub fn forward(&self, x: &Tensor, bias: Option<&Tensor>) -> candle_core::Result<Tensor> {
        let h = self.ln1.forward(x)?;
        let x = (x + self.attn.forward(&h, &h, bias)?)?;
        let h = self.ln2.forward(&x)?;
        x + self.mlp.forward(&h)?
    }
}

/// `[B, 1, 1, L]` additive bias from per-item key validity.
pub fn key_bias(valid: &[Vec<bool>], dtype: DType, device: &Device) -> candle_core::Result<Tensor> {
    let b = valid.len();
    let l = valid.first().map_or(0, Vec::len);
    let data: Vec<f64> = valid
        .iter()
        .flat_map(|row| row.iter().map(|&ok| if ok { 0.0 } else { MASK_BIAS }))
        .collect();
    Tensor::from_vec(data, (b, 1, 1, l), device)?.to_dtype(dtype)
}

/// Validity rows where the first `lens[i]` of `width` positions are valid.
pub fn prefix_valid(lens: &[usize], width: usize) -> Vec<Vec<bool>> {
    lens.iter().map(|&n| (0..width).map(|j| j < n).collect()).collect()
}

/// `[1, 1, L, L]` bias that hides future positions.
pub fn causal_bias(len: usize, dtype: DType, device: &Device) -> candle_core::Result<Tensor> {
    let data: Vec<f64> = (0..len)
        .flat_map(|i| (0..len).map(move |j| if j <= i { 0.0 } else { MASK_BIAS }))
        .collect();
    Tensor::from_vec(data, (1, 1, len, len), device)?.to_dtype(dtype)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_matches_closed_form() {
        let x = Tensor::new(&[[1.0f64, 0.0]], &Device::Cpu).unwrap();
        let p: Vec<Vec<f64>> = softmax_last(&x).unwrap().to_vec2().unwrap();
        let e = std::f64::consts::E;
        assert!((p[0][0] - e / (e + 1.0)).abs() < 1e-15);
        let lp: Vec<Vec<f64>> = log_softmax_last(&x).unwrap().to_vec2().unwrap();
        assert!((lp[0][1] + (1.0 + e).ln()).abs() < 1e-15);
    }

    #[test]
    fn masked_keys_get_zero_weight() {
        let x = Tensor::new(&[[0.3f64, 0.1, 0.2]], &Device::Cpu).unwrap();
        let bias = Tensor::new(&[[0.0f64, MASK_BIAS, 0.0]], &Device::Cpu).unwrap();
        let p: Vec<Vec<f64>> = softmax_last(&(x + bias).unwrap()).unwrap().to_vec2().unwrap();
        assert_eq!(p[0][1], 0.0);
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let mut store = ParamStore::new(DType::F64, 0);
        let ln = LayerNorm::new(&mut store, "ln", 4).unwrap();
        let x = Tensor::new(&[[1.0f64, 2.0, 3.0, 6.0]], &Device::Cpu).unwrap();
        let y: Vec<f64> = ln.forward(&x).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }
}
