//! Binary section snapshots.
//!
//! Layout: `LLBSNAP1`, then little-endian `u32` dimension `m`, `m` x `u32`
//! sizes, `f64` time, `3 N` x `f64` fiber values in node order, and a CRC32 of
//! every byte between the magic and the checksum.

use std::fs;
use std::path::Path;

use crate::bundle::{Field, Section};
use crate::error::{Error, Result};
use crate::geometry::GridShape;

pub const MAGIC: &[u8; 8] = b"LLBSNAP1";

/// Encoded length of a snapshot of `shape`.
pub fn encoded_len(shape: &GridShape) -> usize {
    8 + 4 + 4 * shape.dim() + 8 + 24 * shape.len() + 4
}

pub fn encode_snapshot(v: &Section, t: f64) -> Vec<u8> {
    let shape = v.shape();
    let mut out = Vec::with_capacity(encoded_len(&shape));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(shape.dim() as u32).to_le_bytes());
    for &n in shape.sizes() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&t.to_le_bytes());
    for x in v.values().iter().flatten() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Truncated(format!("header ends at byte {}", bytes.len())))
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(Section, f64)> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Truncated(format!(
            "{} bytes, shorter than the magic",
            bytes.len()
        )));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    let dim = read_u32(bytes, 8)? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidGrid(format!("snapshot dimension {dim}")));
    }
    let sizes = (0..dim)
        .map(|a| read_u32(bytes, 12 + 4 * a).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let shape = GridShape::new(&sizes)?;
    let expected = encoded_len(&shape);
    if bytes.len() != expected {
        return Err(Error::Truncated(format!("{} bytes, expected {expected}", bytes.len())));
    }
    let body = &bytes[MAGIC.len()..expected - 4];
    let stored = read_u32(bytes, expected - 4)?;
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }
    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let t_at = 12 + 4 * dim;
    let t = f64_at(t_at);
    let start = t_at + 8;
    let values = (0..shape.len())
        .map(|node| std::array::from_fn(|c| f64_at(start + 24 * node + 8 * c)))
        .collect();
    Ok((Section::from_values(shape, values)?, t))
}

pub fn write_snapshot(v: &Section, t: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_snapshot(v, t)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<(Section, f64)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}
