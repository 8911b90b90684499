//! Parameter checkpoint file.
//!
//! Layout: an 8-byte little-endian header length `n`, then `n` bytes of JSON
//! `{"tensors": [{"name", "shape", "offset"}...], "metadata": {...}}`, then
//! the packed little-endian f64 payload. `offset` is the byte offset of each
//! tensor from the start of the payload.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::atomic_write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    tensors: Vec<CheckpointEntry>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
}

/// Named tensors plus free-form JSON metadata.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0u64;
        for (name, t) in &self.tensors {
            entries.push(CheckpointEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            });
            offset += 8 * t.numel() as u64;
        }
        let header = Header {
            tensors: entries,
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Parse(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + json.len() + offset as usize);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Parse("checkpoint shorter than its header length".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let json = bytes
            .get(8..8 + n)
            .ok_or_else(|| Error::Parse("truncated checkpoint header".into()))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
        let payload = &bytes[8 + n..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let numel: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let raw = payload
                .get(start..start + 8 * numel)
                .ok_or_else(|| Error::Parse(format!("tensor {} runs past end of file", e.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(e.shape, data).map_err(|err| Error::Parse(err.to_string()))?;
            tensors.push((e.name, t));
        }
        Ok(Checkpoint {
            tensors,
            metadata: header.metadata,
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    atomic_write(path, &ckpt.to_bytes()?)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| e.with_path(path))
}
