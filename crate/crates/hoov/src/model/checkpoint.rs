//! Checkpoint files: JSON header plus little-endian float32 parameter
//! blocks in declaration order. See docs/checkpoint.md.

use super::{HoovNet, ModelConfig};
use crate::model::layers::ParamId;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"HOOVCKPT";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    BadMagic,
    BadHeader(String),
    Truncated,
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "io error: {e}"),
            CheckpointError::BadMagic => write!(f, "not a checkpoint file (bad magic)"),
            CheckpointError::BadHeader(m) => write!(f, "bad checkpoint header: {m}"),
            CheckpointError::Truncated => write!(f, "checkpoint file truncated"),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

/// Training provenance stored with the parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct TrainMeta {
    pub iterations: u64,
    pub seed: u64,
    pub val_mae_cm: Option<f64>,
    pub note: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    config: ModelConfig,
    meta: TrainMeta,
    param_count: usize,
}

pub fn encode_checkpoint(net: &HoovNet, meta: &TrainMeta) -> Vec<u8> {
    let header = Header {
        schema_version: SCHEMA_VERSION,
        config: net.cfg.clone(),
        meta: meta.clone(),
        param_count: net.param_count(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serialization");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for def in net.store().defs() {
        for v in def.values.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(HoovNet, TrainMeta), CheckpointError> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(CheckpointError::Truncated);
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(CheckpointError::BadHeader(format!(
            "unsupported schema version {}",
            header.schema_version
        )));
    }
    let mut net = HoovNet::new(header.config);
    if net.param_count() != header.param_count {
        return Err(CheckpointError::BadHeader(format!(
            "parameter count mismatch: header {} vs constructed {}",
            header.param_count,
            net.param_count()
        )));
    }
    let mut pos = 12 + header_len;
    for i in 0..net.store().len() {
        let len = net.store().defs()[i].len();
        if pos + 4 * len > bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let mut values = Vec::with_capacity(len);
        for j in 0..len {
            let raw: [u8; 4] = bytes[pos + 4 * j..pos + 4 * j + 4].try_into().unwrap();
            values.push(f32::from_le_bytes(raw) as f64);
        }
        pos += 4 * len;
        net.store_mut().set_values(ParamId(i), values);
    }
    Ok((net, header.meta))
}

pub fn save_checkpoint(net: &HoovNet, meta: &TrainMeta, path: &Path) -> Result<(), CheckpointError> {
    let bytes = encode_checkpoint(net, meta);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(HoovNet, TrainMeta), CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
