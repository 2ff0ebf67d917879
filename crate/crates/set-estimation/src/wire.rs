//! Byte-level plumbing shared by the dataset and checkpoint containers.
//!
//! Both formats are little-endian throughout and store floats as f32. The
//! reader walks a fully loaded byte buffer and reports the exact offset and
//! shortfall when a declared payload runs past the end of the file.

use crate::error::{Error, Result};

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> ByteReader<'a> {
        ByteReader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let left = self.buf.len() - self.pos;
        if n > left {
            return Err(Error::Size {
                offset: self.pos as u64,
                expected: n as u64,
                actual: left as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Reads n stored f32 values, widening to f64.
    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| {
            Error::Format("declared float payload overflows".into())
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    /// Everything consumed? Trailing garbage fails the size contract.
    pub fn finish(self) -> Result<()> {
        let left = self.buf.len() - self.pos;
        if left != 0 {
            return Err(Error::Size {
                offset: self.pos as u64,
                expected: 0,
                actual: left as u64,
            });
        }
        Ok(())
    }
}

/// Narrows to f32 at the container boundary; compute stays f64 in memory.
pub(crate) fn push_f32s(out: &mut Vec<u8>, vals: &[f64]) {
    out.reserve(vals.len() * 4);
    for v in vals {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}
