//! Message framing: an 18-byte little-endian header followed by the payload.
//!
//! ```text
//! phase: u64 | axis: u8 | sign: u8 | byte_len: u64 | payload[byte_len]
//! ```

use super::CommError;

pub const HEADER_LEN: usize = 18;

/// `axis` value used by collectives.
pub const COLLECTIVE_AXIS: u8 = 0xff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameHeader {
    pub phase: u64,
    pub axis: u8,
    pub sign: u8,
    pub byte_len: u64,
}

impl FrameHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..8].copy_from_slice(&self.phase.to_le_bytes());
        out[8] = self.axis;
        out[9] = self.sign;
        out[10..].copy_from_slice(&self.byte_len.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CommError> {
        if bytes.len() < HEADER_LEN {
            return Err(CommError::BadFrame(format!("{} bytes is shorter than a header", bytes.len())));
        }
        Ok(Self {
            phase: u64::from_le_bytes(bytes[..8].try_into().unwrap()),
            axis: bytes[8],
            sign: bytes[9],
            byte_len: u64::from_le_bytes(bytes[10..HEADER_LEN].try_into().unwrap()),
        })
    }
}

pub fn encode_frame(header: FrameHeader, payload: &[u8]) -> Vec<u8> {
    debug_assert_eq!(header.byte_len as usize, payload.len());
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(payload);
    out
}

/// Splits a frame, checking that the declared length matches the payload.
pub fn decode_frame(bytes: &[u8]) -> Result<(FrameHeader, &[u8]), CommError> {
    let header = FrameHeader::decode(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != header.byte_len {
        return Err(CommError::SizeMismatch {
            expected: header.byte_len as usize,
            got: payload.len(),
        });
    }
    Ok((header, payload))
}

pub fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn bytes_to_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}
