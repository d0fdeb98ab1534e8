//! Model files: the magic `KBST`, a little-endian u32 format version, a u8
//! model kind, a u64 payload length and a bincode payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::ContextModel;
use crate::gradboost::BoostModel;
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"KBST";
pub const MODEL_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 1 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelFile {
    Boost(BoostModel),
    Context(ContextModel),
}

impl ModelFile {
    fn kind(&self) -> u8 {
        match self {
            ModelFile::Boost(_) => 0,
            ModelFile::Context(_) => 1,
        }
    }
}

pub fn encode_model(model: &ModelFile) -> Result<Vec<u8>> {
    let payload = match model {
        ModelFile::Boost(m) => bincode::serialize(m),
        ModelFile::Context(m) => bincode::serialize(m),
    }
    .map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(model.kind());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    if bytes.len() < HEADER {
        return Err(Error::Format("model header truncated".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION,
            found: version,
        });
    }
    let kind = bytes[8];
    let len = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let payload = &bytes[HEADER..];
    if payload.len() as u64 != len {
        return Err(Error::Format(format!(
            "payload is {} bytes, header says {len}",
            payload.len()
        )));
    }
    let bad = |e: bincode::Error| Error::Format(e.to_string());
    match kind {
        0 => bincode::deserialize(payload)
            .map(ModelFile::Boost)
            .map_err(bad),
        1 => bincode::deserialize(payload)
            .map(ModelFile::Context)
            .map_err(bad),
        k => Err(Error::Format(format!("unknown model kind {k}"))),
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    std::fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    decode_model(&std::fs::read(path)?)
}
