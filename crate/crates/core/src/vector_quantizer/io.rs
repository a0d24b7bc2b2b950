//! Little-endian binary formats for codebooks, latent batches and token
//! streams.
//!
//! Codebook (`FQCB`, version 1): magic, `u32` version, `u32` N, `u32` D,
//! N·D `f32` entries, `f64` decay, `f64` smoothing, N `f64` EMA cluster
//! sizes, N·D `f64` EMA sums, N `u32` usage counts, N `u32` staleness
//! counts.
//!
//! Latents (`FQLT`, version 1): magic, `u32` version, `u32` B, `u32` D,
//! `f32` frame rate, B·D `f32` values.
//!
//! Tokens: bare `u16` indices.

use std::path::Path;

use super::{Codebook, LatentBatch};
use crate::error::{Error, Result};
use crate::io_util::write_bytes_atomic;

const CODEBOOK_MAGIC: &[u8; 4] = b"FQCB";
const LATENT_MAGIC: &[u8; 4] = b"FQLT";
const VERSION: u32 = 1;
/// Largest codebook addressable by a `u16` token stream.
pub const MAX_TOKEN_CODES: usize = 1 << 16;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Truncated(format!("need {n} bytes at offset {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n.checked_mul(4).ok_or_else(overflow)?)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n.checked_mul(8).ok_or_else(overflow)?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        Ok(self
            .take(n.checked_mul(4).ok_or_else(overflow)?)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::MalformedBinary(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::MalformedBinary(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::MalformedBinary(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn overflow() -> Error {
    Error::MalformedBinary("declared size overflows".into())
}

fn matrix_len(rows: u32, cols: u32) -> Result<usize> {
    if rows == 0 || cols == 0 {
        return Err(Error::MalformedBinary(format!("empty {rows}x{cols} matrix")));
    }
    (rows as usize).checked_mul(cols as usize).ok_or_else(overflow)
}

impl Codebook {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(32 + self.entries.len() * 12 + n * 16);
        out.extend_from_slice(CODEBOOK_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        self.entries
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out.extend_from_slice(&self.decay.to_le_bytes());
        out.extend_from_slice(&self.smoothing.to_le_bytes());
        self.ema_cluster_size
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        self.ema_sum
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        self.usage.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        self.staleness
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        r.header(CODEBOOK_MAGIC)?;
        let (n, dim) = (r.u32()?, r.u32()?);
        let len = matrix_len(n, dim)?;
        // every field is read through `take`, which checks the remaining
        // length before anything is allocated
        let entries = r.f32s(len)?;
        let (decay, smoothing) = (r.f64()?, r.f64()?);
        let ema_cluster_size = r.f64s(n as usize)?;
        let ema_sum = r.f64s(len)?;
        let usage = r.u32s(n as usize)?;
        let staleness = r.u32s(n as usize)?;
        r.finish()?;
        if ema_cluster_size.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || ema_sum.iter().any(|s| !s.is_finite()) {
            return Err(Error::MalformedBinary("invalid EMA state".into()));
        }
        let cb = Codebook::from_entries(dim as usize, entries)?.with_ema(decay, smoothing)?;
        Ok(Codebook {
            ema_cluster_size,
            ema_sum,
            usage,
            staleness,
            ..cb
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl LatentBatch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4);
        out.extend_from_slice(LATENT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.frame_rate.to_le_bytes());
        self.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        r.header(LATENT_MAGIC)?;
        let (b, dim) = (r.u32()?, r.u32()?);
        let frame_rate = r.f32()?;
        let data = r.f32s(matrix_len(b, dim)?)?;
        r.finish()?;
        LatentBatch::with_frame_rate(dim as usize, data, frame_rate)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn encode_tokens(indices: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(indices.len() * 2);
    for &i in indices {
        let t = u16::try_from(i).map_err(|_| Error::IndexOutOfRange {
            index: i as usize,
            size: MAX_TOKEN_CODES,
        })?;
        out.extend_from_slice(&t.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tokens(bytes: &[u8]) -> Result<Vec<u32>> {
    if !bytes.len().is_multiple_of(2) {
        return Err(Error::Truncated("token stream has an odd byte count".into()));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
        .collect())
}

pub fn write_tokens(path: impl AsRef<Path>, indices: &[u32]) -> Result<()> {
    write_bytes_atomic(path.as_ref(), &encode_tokens(indices)?)
}

pub fn read_tokens(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    decode_tokens(&std::fs::read(path)?)
}
