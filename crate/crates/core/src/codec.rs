//! Little helpers for the fixed binary file layouts.

use thiserror::Error;

use crate::engine::{
    EngineError, G1Element, G2Element, GtElement, Scalar, G1_BYTES, G2_BYTES, GT_BYTES,
    SCALAR_BYTES,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unexpected end of input at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last field")]
    TrailingBytes(usize),
    #[error("malformed field: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8]) -> Self {
        Self {
            buf: magic.to_vec(),
        }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn g1(&mut self, p: &G1Element) -> &mut Self {
        self.buf.extend_from_slice(&p.to_bytes());
        self
    }

    pub fn g2(&mut self, p: &G2Element) -> &mut Self {
        self.buf.extend_from_slice(&p.to_bytes());
        self
    }

    pub fn gt(&mut self, p: &GtElement) -> &mut Self {
        self.buf.extend_from_slice(&p.to_bytes());
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], magic: &[u8; 8]) -> Result<Self, FormatError> {
        if buf.len() < 8 {
            return Err(FormatError::Truncated(buf.len()));
        }
        if &buf[..8] != magic {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(&buf[..8]).into_owned(),
            });
        }
        Ok(Self { buf, pos: 8 })
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.buf.len())
            .ok_or(FormatError::Truncated(self.buf.len()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    /// Fails early when a declared element count cannot possibly fit.
    pub fn expect_remaining(&self, count: usize, each: usize) -> Result<(), FormatError> {
        match count.checked_mul(each) {
            Some(total) if total <= self.buf.len() - self.pos => Ok(()),
            _ => Err(FormatError::Truncated(self.buf.len())),
        }
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn g1(&mut self) -> Result<G1Element, FormatError> {
        Ok(G1Element::from_bytes(self.take(G1_BYTES)?)?)
    }

    pub fn g2(&mut self) -> Result<G2Element, FormatError> {
        Ok(G2Element::from_bytes(self.take(G2_BYTES)?)?)
    }

    pub fn gt(&mut self) -> Result<GtElement, FormatError> {
        Ok(GtElement::from_bytes(self.take(GT_BYTES)?)?)
    }

    #[allow(dead_code)]
    pub fn scalar(&mut self) -> Result<Scalar, FormatError> {
        Ok(Scalar::from_bytes(self.take(SCALAR_BYTES)?)?)
    }

    pub fn finish(self) -> Result<(), FormatError> {
        let rest = self.buf.len() - self.pos;
        if rest != 0 {
            return Err(FormatError::TrailingBytes(rest));
        }
        Ok(())
    }
}
