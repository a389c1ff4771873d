use std::fs;
use std::path::Path;

use super::mlp::{Activation, MlpField, TimeEmbedding};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PNPFLOW\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializes a network.
///
/// Layout, all integers little-endian:
/// magic (8 bytes), version `u32`, activation id `u8`, embedding id `u8`,
/// reserved `u16`, width count `u32`, widths `u32 * count`,
/// parameter count `u64`, parameters `f64 * count`.
pub fn encode_checkpoint(field: &MlpField) -> Vec<u8> {
    let widths = field.widths();
    let mut buf = Vec::with_capacity(28 + 4 * widths.len() + 8 * field.param_count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(field.activation().id());
    buf.push(field.embedding().id());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(widths.len() as u32).to_le_bytes());
    for &w in widths {
        buf.extend_from_slice(&(w as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(field.param_count() as u64).to_le_bytes());
    for p in field.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint produced by [`encode_checkpoint`].
pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<MlpField, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let header = r.take(4)?;
    let activation = Activation::from_id(header[0]).ok_or_else(|| format!("unknown activation id {}", header[0]))?;
    let embedding =
        TimeEmbedding::from_id(header[1]).ok_or_else(|| format!("unknown time embedding id {}", header[1]))?;
    let count = r.u32()? as usize;
    if count < 2 {
        return Err(format!("need at least 2 layer widths, got {count}"));
    }
    if count > 1024 {
        return Err(format!("implausible layer count {count}"));
    }
    let widths = (0..count).map(|_| r.u32().map(|w| w as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    let state_dim = widths[count - 1];
    if widths[0] != state_dim + embedding.width() {
        return Err(format!(
            "input width {} does not match state dim {state_dim} plus embedding",
            widths[0]
        ));
    }
    let expected: u64 = widths.windows(2).map(|w| (w[0] as u64 + 1) * w[1] as u64).sum();
    let n_params = r.u64()?;
    if n_params != expected {
        return Err(format!("parameter count {n_params} does not match widths (expected {expected})"));
    }
    let remaining = bytes.len() - r.pos;
    if remaining as u64 != n_params * 8 {
        return Err(format!("payload is {remaining} bytes, expected {}", n_params * 8));
    }
    let params = r
        .take(remaining)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    MlpField::from_params(state_dim, &widths[1..count - 1], activation, embedding, params).map_err(|e| e.to_string())
}

pub fn write_checkpoint(path: &Path, field: &MlpField) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_checkpoint(field)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<MlpField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| Error::format(path, reason))
}
