//! Binary checkpoints.
//!
//! Layout, integers `u32` little-endian: `b"SPANCKPT1"`, config JSON byte
//! length, config JSON, tensor count, then per tensor: name byte length,
//! UTF-8 name, rank, each dimension, row-major `f32` little-endian values.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{ModelConfig, ModelParams, SpanModel};
use crate::error::{Error, Result};
use crate::tensor::Parameters;

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"SPANCKPT1";

pub fn write_checkpoint(model: &SpanModel<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let json = serde_json::to_vec(&model.config).expect("config serializes");
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let tensors = model.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(data: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if data.len() < n {
        return Err(Error::Format("checkpoint truncated".into()));
    }
    let (head, tail) = data.split_at(n);
    *data = tail;
    Ok(head)
}

fn u32_at(data: &mut &[u8]) -> Result<usize> {
    let mut b = [0u8; 4];
    take(data, 4)?.read_exact(&mut b).expect("four bytes");
    Ok(u32::from_le_bytes(b) as usize)
}

/// Parse a checkpoint, validating every tensor's name and shape against the
/// embedded configuration.
pub fn read_checkpoint(mut data: &[u8]) -> Result<SpanModel<f32>> {
    if take(&mut data, CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a SPANCKPT1 checkpoint".into()));
    }
    let len = u32_at(&mut data)?;
    let config: ModelConfig = serde_json::from_slice(take(&mut data, len)?)
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    config.validate()?;
    let mut params = ModelParams::<f32>::zeros(&config);
    let count = u32_at(&mut data)?;
    {
        let mut slots = params.tensors_mut();
        if count != slots.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {count} tensors, config expects {}",
                slots.len()
            )));
        }
        for (expected_name, slot) in slots.iter_mut() {
            let n = u32_at(&mut data)?;
            let name = std::str::from_utf8(take(&mut data, n)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            if name != expected_name {
                return Err(Error::Format(format!("expected tensor {expected_name}, found {name}")));
            }
            let rank = u32_at(&mut data)?;
            let shape = (0..rank).map(|_| u32_at(&mut data)).collect::<Result<Vec<_>>>()?;
            if shape != slot.shape() {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {shape:?}, config expects {:?}",
                    slot.shape()
                )));
            }
            for v in slot.iter_mut() {
                let mut b = [0u8; 4];
                take(&mut data, 4)?.read_exact(&mut b).expect("four bytes");
                *v = f32::from_le_bytes(b);
            }
        }
    }
    if !data.is_empty() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    SpanModel::from_params(config, params)
}

pub fn save_checkpoint(model: &SpanModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SpanModel<f32>> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&data)
}
