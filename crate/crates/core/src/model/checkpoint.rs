//! Safetensors checkpoints carrying the model configuration in the header.

use std::collections::HashMap;
use std::path::Path;

use candle_core::Tensor;

use super::{HiteaModel, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "hitea-ckpt/1";

/// Writes every parameter plus the config. The file is written next to
/// `path` and renamed into place, so a reader never sees a partial file.
pub fn save_checkpoint(model: &HiteaModel, path: &Path) -> Result<()> {
    let tensors: Vec<(String, Tensor)> = model
        .params()
        .named()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
        .collect();
    let metadata = HashMap::from([
        ("format".to_string(), CHECKPOINT_FORMAT.to_string()),
        ("model_config".to_string(), serde_json::to_string(model.config())?),
    ]);
    let bytes = safetensors::serialize(tensors, Some(metadata))
        .map_err(|e| Error::contract(format!("serializing checkpoint: {e}")))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<HiteaModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Data(format!("checkpoint {}: {reason}", path.display()));
    let (_, header) = safetensors::SafeTensors::read_metadata(&bytes).map_err(|e| bad(e.to_string()))?;
    let meta = header.metadata().clone().unwrap_or_default();
    match meta.get("format") {
        Some(f) if f == CHECKPOINT_FORMAT => {}
        other => return Err(bad(format!("unsupported format {other:?}"))),
    }
    let config: ModelConfig = serde_json::from_str(
        meta.get("model_config")
            .ok_or_else(|| bad("missing model_config".into()))?,
    )?;
    let tensors = candle_core::safetensors::load_buffer(&bytes, &candle_core::Device::Cpu)?;
    let dtype = tensors
        .values()
        .next()
        .map(|t| t.dtype())
        .ok_or_else(|| bad("no tensors".into()))?;
    let model = HiteaModel::new(config, dtype, 0)?;
    if tensors.len() != model.params().named().len() {
        return Err(bad(format!(
            "{} tensors, model has {} parameters",
            tensors.len(),
            model.params().named().len()
        )));
    }
    for (name, var) in model.params().named() {
        let t = tensors
            .get(name)
            .ok_or_else(|| bad(format!("missing parameter {name}")))?;
        if t.dims() != var.dims() {
            return Err(bad(format!(
                "parameter {name} has shape {:?}, expected {:?}",
                t.dims(),
                var.dims()
            )));
        }
        var.set(&t.to_dtype(dtype)?)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    #[test]
    fn round_trip_is_bitwise() {
        let config = ModelConfig {
            hidden_dim: 8,
            heads: 2,
            ..ModelConfig::default()
        };
        let model = HiteaModel::new(config.clone(), DType::F32, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.safetensors");
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config(), &config);
        for (name, var) in model.params().named() {
            let a: Vec<f32> = var.flatten_all().unwrap().to_vec1().unwrap();
            let b: Vec<f32> = back
                .params()
                .get(name)
                .unwrap()
                .flatten_all()
                .unwrap()
                .to_vec1()
                .unwrap();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn foreign_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.safetensors");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Data(_))));
    }
}
