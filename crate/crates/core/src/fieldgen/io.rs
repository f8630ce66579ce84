//! Flat binary dump of a field.
//!
//! Layout: `b"MSFI"`, then `version`, `d`, `n` as little-endian `u32`
//! (16 header bytes), then `n^d` little-endian `f64` values in row-major order.

use std::io::{Read, Write};

use super::FieldSample;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSFI";
pub const VERSION: u32 = 1;

/// Payload of a field file; the grid spacing is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub d: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

pub fn write_field<W: Write>(sample: &FieldSample, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(sample.grid.d as u32).to_le_bytes())?;
    out.write_all(&(sample.grid.n as u32).to_le_bytes())?;
    for v in &sample.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut input: R) -> Result<RawField> {
    let io = |e: std::io::Error| Error::Format(e.to_string());
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(io)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = word(8) as usize;
    let n = word(12) as usize;
    if !(1..=3).contains(&d) {
        return Err(Error::Format(format!("bad dimension {d}")));
    }
    let len = n
        .checked_pow(d as u32)
        .filter(|&l| l <= super::grid::MAX_CELLS)
        .ok_or_else(|| Error::Format(format!("grid {n}^{d} too large")))?;
    let mut bytes = vec![0u8; len * 8];
    input.read_exact(&mut bytes).map_err(io)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawField { d, n, values })
}
