//! Binary strain file (`GWSD`).
//!
//! Layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `GWSD` |
//! | 2 | format version (u16) |
//! | 2 | detector tag (ASCII) |
//! | 8 | start_s (i64) |
//! | 4 | start_ns (u32) |
//! | 8 | sample rate in Hz (f64) |
//! | 8 | sample count (u64) |
//! | 32 | SHA-256 of the payload |
//! | 8·n | samples (f64) |

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::synth::{DetectorId, TimeSeries};

pub const MAGIC: &[u8; 4] = b"GWSD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 4 + 8 + 8 + 32;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes `ts`; returns the file bytes and the payload checksum.
pub fn encode_strain(ts: &TimeSeries) -> Result<(Vec<u8>, String)> {
    if ts.samples.is_empty() {
        return Err(Error::EmptySeries);
    }
    let payload: Vec<u8> = ts.samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    let digest = Sha256::digest(&payload);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&ts.detector.as_bytes());
    out.extend_from_slice(&ts.start_s.to_le_bytes());
    out.extend_from_slice(&ts.start_ns.to_le_bytes());
    out.extend_from_slice(&(ts.sample_rate_hz() as f64).to_le_bytes());
    out.extend_from_slice(&(ts.samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&digest);
    out.extend_from_slice(&payload);
    Ok((out, hex::encode(digest)))
}

pub fn decode_strain(bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse {
            what: "strain file",
            detail: "truncated header".into(),
        });
    }
    let take = |at: usize, n: usize| &bytes[at..at + n];
    let version = u16::from_le_bytes(take(4, 2).try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let detector = DetectorId::from_bytes(take(6, 2).try_into().unwrap())?;
    let start_s = i64::from_le_bytes(take(8, 8).try_into().unwrap());
    let start_ns = u32::from_le_bytes(take(16, 4).try_into().unwrap());
    let rate = f64::from_le_bytes(take(20, 8).try_into().unwrap());
    let n = u64::from_le_bytes(take(28, 8).try_into().unwrap()) as usize;
    let stored = take(36, 32);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n.saturating_mul(8) {
        return Err(Error::Parse {
            what: "strain file",
            detail: format!(
                "payload has {} bytes, header promises {}",
                payload.len(),
                n * 8
            ),
        });
    }
    if Sha256::digest(payload).as_slice() != stored {
        return Err(Error::ChecksumMismatch);
    }
    if !(rate > 0.0) || rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(invalid(format!(
            "sample rate {rate} is not a whole number of Hz"
        )));
    }
    let samples = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TimeSeries::new(detector, start_s, start_ns, rate as u32, samples)
}

/// Writes `ts` to `path`, returning the payload SHA-256 as hex.
pub fn write_strain(ts: &TimeSeries, path: &Path) -> Result<String> {
    let (bytes, checksum) = encode_strain(ts)?;
    std::fs::write(path, bytes)?;
    Ok(checksum)
}

pub fn read_strain(path: &Path) -> Result<TimeSeries> {
    decode_strain(&std::fs::read(path)?)
}

/// Re-reads the payload checksum stored in a file header.
pub fn stored_checksum(bytes: &[u8]) -> Result<String> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    Ok(hex::encode(&bytes[36..68]))
}
