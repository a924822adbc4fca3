//! Model checkpoint serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"EMNB"
//! u32     format version (currently 1)
//! u32     header length in bytes
//! [u8]    header: UTF-8 JSON {kind, descriptor, params: [{name, shape}]}
//! [f32]   parameter payload, tensors concatenated in header order
//! u32     CRC32 of every preceding byte
//! ```
//!
//! Parameters are stored as 32-bit floats; loading therefore rounds `f64`
//! training precision to `f32`. A saved file reloaded and saved again is
//! byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMNB";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamSpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: String,
    descriptor: Value,
    params: Vec<ParamSpec>,
}

#[derive(Debug, Clone)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

/// Serialized parameters plus an architecture/training descriptor.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub kind: String,
    pub descriptor: Value,
    pub tensors: Vec<NamedTensor>,
}

impl ModelBundle {
    pub fn new(kind: &str, descriptor: Value) -> Self {
        ModelBundle {
            kind: kind.to_string(),
            descriptor,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) {
        self.tensors.push(NamedTensor {
            name: name.to_string(),
            tensor,
        });
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.tensor)
            .ok_or_else(|| Error::Format(format!("bundle has no tensor named '{name}'")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            kind: self.kind.clone(),
            descriptor: self.descriptor.clone(),
            params: self
                .tensors
                .iter()
                .map(|t| ParamSpec {
                    name: t.name.clone(),
                    shape: t.tensor.shape().to_vec(),
                })
                .collect(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        let payload: usize = self.tensors.iter().map(|t| t.tensor.len() * 4).sum();
        let mut out = Vec::with_capacity(16 + header_bytes.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for t in &self.tensors {
            for &v in t.tensor.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Corruption("bundle shorter than its fixed header".into()));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("not a model bundle (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != BUNDLE_VERSION {
            return Err(Error::Format(format!(
                "bundle version {version}, expected {BUNDLE_VERSION}"
            )));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(body) != stored_crc {
            return Err(Error::Corruption("bundle checksum mismatch".into()));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if 12 + header_len > body.len() {
            return Err(Error::Corruption("bundle header truncated".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
            .map_err(|e| Error::Format(format!("bundle header is not valid JSON: {e}")))?;
        let mut offset = 12 + header_len;
        let mut tensors = Vec::with_capacity(header.params.len());
        for spec in &header.params {
            let count: usize = spec.shape.iter().product();
            let end = offset + count * 4;
            if end > body.len() {
                return Err(Error::Corruption(format!(
                    "bundle payload truncated at tensor '{}'",
                    spec.name
                )));
            }
            let mut data = Vec::with_capacity(count);
            for chunk in bytes[offset..end].chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
            tensors.push(NamedTensor {
                name: spec.name.clone(),
                tensor: Tensor::from_vec(&spec.shape, data)?,
            });
            offset = end;
        }
        if offset != body.len() {
            return Err(Error::Corruption("bundle has trailing payload bytes".into()));
        }
        Ok(ModelBundle {
            kind: header.kind,
            descriptor: header.descriptor,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// CRC32 of a file's raw bytes; the identity used for freeze contracts.
pub fn file_checksum(path: &Path) -> Result<u32> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(crc32fast::hash(&bytes))
}
