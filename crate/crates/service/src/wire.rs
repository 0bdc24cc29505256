//! Binary frame packet: `u32` revision, `u32` meta length, meta JSON, then PNG bytes.
//! Integers are little-endian. The revision field carries the low 32 bits; the meta JSON
//! carries the full value.

use crate::error::{ServiceError, ServiceResult};

pub const HEADER_LEN: usize = 8;

pub fn encode_packet(revision: u64, meta_json: &[u8], image: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + meta_json.len() + image.len());
    out.extend_from_slice(&(revision as u32).to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(meta_json);
    out.extend_from_slice(image);
    out
}

/// Splits a packet into `(revision, meta, image)`.
pub fn decode_packet(bytes: &[u8]) -> ServiceResult<(u32, &[u8], &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(ServiceError::BadRequest(format!("packet of {} bytes is shorter than its header", bytes.len())));
    }
    let revision = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let meta_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rest = &bytes[HEADER_LEN..];
    if meta_len > rest.len() {
        return Err(ServiceError::BadRequest(format!(
            "meta length {meta_len} exceeds remaining {} bytes",
            rest.len()
        )));
    }
    Ok((revision, &rest[..meta_len], &rest[meta_len..]))
}
