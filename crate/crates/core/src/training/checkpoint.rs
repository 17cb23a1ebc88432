use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TrainingConfig;
use crate::autodiff::Tensor;
use crate::fsio;
use crate::model::{ModelDims, ModelError, ModelParams};

pub const MAGIC: &[u8; 4] = b"PGNC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub dims: ModelDims,
    pub vocab_hash: String,
    pub step: u64,
    pub coverage_enabled: bool,
    pub config: TrainingConfig,
}

/// Parameters plus the metadata needed to resume or decode with them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ModelParams,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
    #[error("checkpoint parameter `{name}`: {detail}")]
    Record { name: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Layout: magic, `u32` version, `u32` metadata length, metadata JSON, then
/// one record per parameter in sorted name order: `u32` name length, name,
/// `u32` rank, `u32` dims, little-endian `f32` values.
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let meta = serde_json::to_vec(&ckpt.meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(16 + meta.len() + 4 * ckpt.params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ckpt.meta.format_version.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for (name, t) in ckpt.params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = cur.u32("metadata length")? as usize;
    let meta: CheckpointMeta =
        serde_json::from_slice(cur.take(meta_len, "metadata")?).map_err(|e| CheckpointError::Meta(e.to_string()))?;
    if meta.format_version != version {
        return Err(CheckpointError::Meta(format!(
            "metadata claims version {} but header says {version}",
            meta.format_version
        )));
    }
    let expected: BTreeMap<&str, Vec<usize>> = meta.dims.param_shapes().into_iter().collect();
    let mut tensors = BTreeMap::new();
    while !cur.done() {
        let name_len = cur.u32("parameter name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "parameter name")?)
            .map_err(|_| CheckpointError::Meta("parameter name is not UTF-8".into()))?
            .to_string();
        let shape = expected.get(name.as_str()).ok_or_else(|| CheckpointError::Record {
            name: name.clone(),
            detail: "not a parameter of this model".into(),
        })?;
        let rank = cur.u32("parameter rank")? as usize;
        if rank != shape.len() {
            return Err(CheckpointError::Record {
                name,
                detail: format!("rank {rank}, expected {}", shape.len()),
            });
        }
        let dims = (0..rank)
            .map(|_| cur.u32("parameter dims").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if &dims != shape {
            return Err(CheckpointError::Record {
                name,
                detail: format!("shape {dims:?}, expected {shape:?}"),
            });
        }
        let numel: usize = dims.iter().product();
        let raw = cur.take(numel * 4, "parameter values")?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let t = Tensor::new(dims, values).map_err(|e| CheckpointError::Record {
            name: name.clone(),
            detail: e.to_string(),
        })?;
        if tensors.insert(name.clone(), t).is_some() {
            return Err(CheckpointError::Record {
                name,
                detail: "appears twice".into(),
            });
        }
    }
    let params = ModelParams::from_tensors(meta.dims, tensors)?;
    Ok(Checkpoint { meta, params })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fsio::write_atomic(path, &encode_checkpoint(ckpt)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}
