//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "SVGVCKPT"
//! version      u32
//! header_len   u32
//! header       header_len bytes of JSON (ModelHeader plus format_version)
//! tensor_count u32
//! per tensor:  u32 name_len, name, u64 rows, u64 cols, rows*cols f64 row-major
//! ```

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{Model, ModelHeader};
use super::params::ModelParams;
use super::NnError;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SVGVCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoredHeader {
    format_version: u32,
    #[serde(flatten)]
    model: ModelHeader,
}

pub fn encode(model: &Model) -> Vec<u8> {
    let header = serde_json::to_vec(&StoredHeader {
        format_version: FORMAT_VERSION,
        model: model.header.clone(),
    })
    .expect("header is serializable");
    let tensors = model.params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            NnError::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint file".into()).into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported format version {version}")).into());
    }
    let hlen = r.u32()? as usize;
    let stored: StoredHeader = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| NnError::Checkpoint(format!("bad header: {e}")))?;
    let header = stored.model;

    let mut params = ModelParams::zeros(header.dims);
    let count = r.u32()?;
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| NnError::Checkpoint(format!("tensor {name} too large")))?;
        let data: Vec<f64> = r
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Array2::from_shape_vec((rows, cols), data).expect("length checked");
        let slot = match name.as_str() {
            "w_in" => &mut params.w_in,
            "b_in" => &mut params.b_in,
            "w1" => &mut params.w1,
            "w2" => &mut params.w2,
            "w_det" => &mut params.w_det,
            "b_det" => &mut params.b_det,
            "w_cwe" => &mut params.w_cwe,
            "b_cwe" => &mut params.b_cwe,
            "embedding" => {
                params.embedding = Some(t);
                continue;
            }
            other => {
                return Err(NnError::Checkpoint(format!("unknown tensor `{other}`")).into());
            }
        };
        if slot.dim() != t.dim() {
            return Err(NnError::ShapeMismatch(format!(
                "tensor {name} is {rows}x{cols}, header implies {:?}",
                slot.dim()
            ))
            .into());
        }
        *slot = t;
    }
    if r.pos != bytes.len() {
        return Err(NnError::Checkpoint("trailing bytes after tensors".into()).into());
    }
    Model::from_parts(header, params)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode(&bytes)
}
