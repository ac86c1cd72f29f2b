//! Model checkpoints: `magic "EEGK"`, `version u32`, `descriptor_len u32`,
//! a JSON descriptor (model spec, tensor names and shapes, batch-norm
//! widths), then every parameter followed by each batch-norm layer's
//! running mean and variance as little-endian `f32`.

use std::fs;
use std::path::Path;

use neurodecode_autodiff::{BatchStats, ParamId, Tensor};
use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EEGK";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 12;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Descriptor {
    spec: ModelSpec,
    tensors: Vec<TensorEntry>,
    batch_norm: Vec<usize>,
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: "<checkpoint>".into(),
        reason: reason.into(),
    }
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let desc = Descriptor {
        spec: model.spec.clone(),
        tensors: model
            .params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
        batch_norm: model.running.iter().map(|s| s.mean.len()).collect(),
    };
    let json = serde_json::to_vec(&desc).expect("descriptor serializes");
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    let values = model
        .params
        .iter()
        .flat_map(|p| p.value.data().iter())
        .chain(model.running.iter().flat_map(|s| s.mean.iter().chain(&s.var)));
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes).map_err(|e| match e {
        Error::Malformed { reason, .. } => Error::Malformed {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: PREFIX_LEN,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if found != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found,
        });
    }
    if bytes.len() < PREFIX_LEN {
        return Err(Error::Truncated {
            expected: PREFIX_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"));
    let version = word(4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let json_end = PREFIX_LEN + word(8) as usize;
    if bytes.len() < json_end {
        return Err(Error::Truncated {
            expected: json_end,
            found: bytes.len(),
        });
    }
    let desc: Descriptor =
        serde_json::from_slice(&bytes[PREFIX_LEN..json_end]).map_err(|e| malformed(format!("descriptor: {e}")))?;

    let mut model = Model::build(&desc.spec, 0)?;
    let shapes_match = model.params.len() == desc.tensors.len()
        && model
            .params
            .iter()
            .zip(&desc.tensors)
            .all(|(p, t)| p.name == t.name && p.value.shape() == t.shape.as_slice());
    let bn_match = model.running.iter().map(|s| s.mean.len()).eq(desc.batch_norm.iter().copied());
    if !shapes_match || !bn_match {
        return Err(malformed("tensor layout does not match the model spec"));
    }

    let n_values = model.params.count() + 2 * desc.batch_norm.iter().sum::<usize>();
    let expected = json_end + 4 * n_values;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            expected,
            found: bytes.len(),
        });
    }
    let mut values = bytes[json_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")));
    let mut take = |n: usize| -> Vec<f32> { values.by_ref().take(n).collect() };
    for (i, t) in desc.tensors.iter().enumerate() {
        let n = t.shape.iter().product();
        model.params.set_value(ParamId(i), Tensor::new(&t.shape, take(n))?)?;
    }
    let running = desc
        .batch_norm
        .iter()
        .map(|&n| BatchStats {
            mean: take(n),
            var: take(n),
        })
        .collect();
    model.set_running_stats(running);
    Ok(model)
}
