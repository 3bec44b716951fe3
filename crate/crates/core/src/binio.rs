//! Little-endian read/write helpers shared by the checkpoint and cache formats.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message} at byte offset {offset}")]
pub struct DecodeError {
    pub offset: usize,
    pub message: String,
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn error(&self, message: impl Into<String>) -> DecodeError {
        DecodeError { offset: self.pos, message: message.into() }
    }

    pub fn fail<T>(&self, message: impl Into<String>) -> Result<T, DecodeError> {
        Err(self.error(message))
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if n > self.remaining() {
            return self.fail(format!("truncated: need {n} bytes, {} left", self.remaining()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// A `u64` that must fit the remaining buffer when multiplied by `unit`.
    pub fn count(&mut self, unit: usize) -> Result<usize, DecodeError> {
        let at = self.pos;
        let n = self.u64()?;
        self.bounded(n, unit, at)
    }

    pub fn count32(&mut self, unit: usize) -> Result<usize, DecodeError> {
        let at = self.pos;
        let n = self.u32()? as u64;
        self.bounded(n, unit, at)
    }

    fn bounded(&self, n: u64, unit: usize, at: usize) -> Result<usize, DecodeError> {
        let fits = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(unit.max(1)).map(|bytes| (n, bytes)))
            .filter(|&(_, bytes)| bytes <= self.remaining());
        match fits {
            Some((n, _)) => Ok(n),
            None => Err(DecodeError {
                offset: at,
                message: format!("length {n} exceeds the remaining {} bytes", self.remaining()),
            }),
        }
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        let n = self.count32(1)?;
        let at = self.pos;
        let raw = self.bytes(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| DecodeError { offset: at, message: "invalid UTF-8".into() })
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, DecodeError> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| DecodeError { offset: self.pos, message: "length overflow".into() })?;
        let raw = self.bytes(len)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DecodeError> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| DecodeError { offset: self.pos, message: "length overflow".into() })?;
        let raw = self.bytes(len)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}
