//! Self-describing checkpoint files.
//!
//! Layout: magic bytes, format version, the network config as a JSON text
//! block, the full state payload as raw little-endian f32 in declaration
//! order (learnable parameters, then batch-norm running statistics), and a
//! trailing CRC-32 over everything before it.

use std::fs;
use std::path::Path;

use super::{build_network, Model, NetworkConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TBNETCKP";
const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config_json = serde_json::to_string(model.config())?;
    buf.extend_from_slice(&(config_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(config_json.as_bytes());
    let state = model.state_snapshot();
    let scalars: u64 = state.iter().map(|v| v.len() as u64).sum();
    buf.extend_from_slice(&scalars.to_le_bytes());
    for vec in &state {
        for v in vec {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let buf = fs::read(path)?;
    if buf.len() < MAGIC.len() + 4 + 8 + 8 + 4 {
        return Err(Error::CheckpointTruncated(format!(
            "{} bytes is shorter than the fixed header",
            buf.len()
        )));
    }
    let (body, crc_bytes) = buf.split_at(buf.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::CheckpointChecksum);
    }
    if &body[..8] != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let config_end = 20usize.checked_add(config_len).ok_or_else(|| {
        Error::CheckpointTruncated("config length overflows".into())
    })?;
    if body.len() < config_end + 8 {
        return Err(Error::CheckpointTruncated(
            "config block extends past end of file".into(),
        ));
    }
    let config_json = std::str::from_utf8(&body[20..config_end])
        .map_err(|_| Error::CheckpointShape("config block is not UTF-8".into()))?;
    let config: NetworkConfig = serde_json::from_str(config_json)?;
    let scalars = u64::from_le_bytes(body[config_end..config_end + 8].try_into().unwrap()) as usize;
    let payload = &body[config_end + 8..];
    if payload.len() != scalars * 4 {
        return Err(Error::CheckpointShape(format!(
            "payload holds {} bytes, header promises {} scalars ({} bytes)",
            payload.len(),
            scalars,
            scalars * 4
        )));
    }

    let mut model = build_network(&config, 0)?;
    let expected = model.state_snapshot();
    let expected_scalars: usize = expected.iter().map(|v| v.len()).sum();
    if scalars != expected_scalars {
        return Err(Error::CheckpointShape(format!(
            "checkpoint carries {scalars} scalars, config implies {expected_scalars}"
        )));
    }
    let mut state = Vec::with_capacity(expected.len());
    let mut off = 0usize;
    for tmpl in &expected {
        let mut vec = Vec::with_capacity(tmpl.len());
        for _ in 0..tmpl.len() {
            vec.push(f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()));
            off += 4;
        }
        state.push(vec);
    }
    model.load_state(&state)?;
    Ok(model)
}
