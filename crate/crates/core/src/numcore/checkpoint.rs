//! Parameter checkpoints: an 8-byte magic, a little-endian `u64` manifest
//! length, the JSON manifest, then every tensor as raw little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"GEMLCKPT";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dtype: String,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

/// Serializes a store (tensors in name order) with free-form metadata.
pub fn write_checkpoint(store: &ParamStore, meta: &serde_json::Value, out: &mut impl Write) -> Result<()> {
    let ids: Vec<_> = store.ids().collect();
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        dtype: "f64".into(),
        tensors: ids
            .iter()
            .map(|&id| TensorEntry {
                name: store.name(id).to_string(),
                shape: store.value(id).shape().to_vec(),
            })
            .collect(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * store.num_scalars());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for id in ids {
        for v in store.value(id).data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| Error::io("<checkpoint>", e))
}

/// Reads a checkpoint back into a fresh store plus its metadata.
pub fn read_checkpoint(input: &mut impl Read) -> Result<(ParamStore, serde_json::Value)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<checkpoint>", e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("missing magic header".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Checkpoint("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(body)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", manifest.version)));
    }
    if manifest.dtype != "f64" {
        return Err(Error::Checkpoint(format!("unsupported dtype {}", manifest.dtype)));
    }
    let mut payload = &bytes[16 + len..];
    let mut store = ParamStore::new();
    for entry in manifest.tensors {
        let n: usize = entry.shape.iter().product();
        if payload.len() < 8 * n {
            return Err(Error::Checkpoint(format!("truncated payload for `{}`", entry.name)));
        }
        let (head, rest) = payload.split_at(8 * n);
        let data = head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        store.insert(entry.name, Tensor::new(entry.shape, data)?)?;
        payload = rest;
    }
    if !payload.is_empty() {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    Ok((store, manifest.meta))
}

pub fn save_checkpoint(store: &ParamStore, meta: &serde_json::Value, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(store, meta, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut f)
}
