use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{layout, ModelConfig, ModelParams, Normalization, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: ModelConfig,
    tensors: Vec<Tensor>,
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let mut tensors = params.tensors.clone();
    for (name, v) in params.norm.as_tensors() {
        tensors.push(Tensor {
            name: name.into(),
            shape: [1, v.len()],
            data: v.clone(),
        });
    }
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: params.config.clone(),
        tensors,
    };
    let mut text = serde_json::to_string(&file)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {other:?} (expected {CHECKPOINT_VERSION})"
            )))
        }
    }
    let file: CheckpointFile =
        serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    file.config.validate()?;
    let mut rest = file.tensors.into_iter();
    let mut tensors = Vec::new();
    for (name, shape, _) in layout(&file.config) {
        let t = rest
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.name != name || t.shape != shape || t.data.len() != shape[0] * shape[1] {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {:?} and {} values, expected {name} {shape:?}",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        tensors.push(t);
    }
    let mut norm = Normalization::identity(file.config.out_dim);
    let expected: Vec<(String, usize)> = norm
        .as_tensors()
        .iter()
        .map(|(n, v)| (n.to_string(), v.len()))
        .collect();
    let mut loaded = Vec::new();
    for (name, len) in expected {
        let t = rest
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.name != name || t.shape != [1, len] || t.data.len() != len {
            return Err(Error::Checkpoint(format!(
                "normalization tensor {} malformed",
                t.name
            )));
        }
        loaded.push(t.data);
    }
    if rest.next().is_some() {
        return Err(Error::Checkpoint("unexpected trailing tensors".into()));
    }
    let mut it = loaded.into_iter();
    norm.globals_shift = it.next().expect("six tensors");
    norm.globals_scale = it.next().expect("six tensors");
    norm.field_shift = it.next().expect("six tensors");
    norm.field_scale = it.next().expect("six tensors");
    norm.out_shift = it.next().expect("six tensors");
    norm.out_scale = it.next().expect("six tensors");
    Ok(ModelParams {
        config: file.config,
        tensors,
        norm,
    })
}
