//! Little-endian primitive encoding shared by the binary formats.

use nalgebra::{DMatrix, DVector};

use super::archive::ArchiveError;

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }

    pub fn str(&mut self, s: &str) {
        self.len(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn vector(&mut self, v: &DVector<f64>) {
        self.len(v.len());
        for x in v.iter() {
            self.f64(*x);
        }
    }

    /// Row count, column count, then entries in row-major order.
    pub fn matrix(&mut self, m: &DMatrix<f64>) {
        self.len(m.nrows());
        self.len(m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        if n > self.remaining() {
            return Err(ArchiveError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, ArchiveError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64, ArchiveError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64, ArchiveError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// A length prefix for items of `item_size` bytes, checked against the
    /// bytes actually left so corrupt lengths never trigger huge allocations.
    pub fn len(&mut self, item_size: usize) -> Result<usize, ArchiveError> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| ArchiveError::Truncated)?;
        if n.checked_mul(item_size.max(1))
            .map_or(true, |b| b > self.remaining())
        {
            return Err(ArchiveError::Truncated);
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String, ArchiveError> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ArchiveError::Malformed("invalid UTF-8 string".into()))
    }

    pub fn vector(&mut self) -> Result<DVector<f64>, ArchiveError> {
        let n = self.len(8)?;
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = self.f64()?;
        }
        Ok(v)
    }

    pub fn matrix(&mut self) -> Result<DMatrix<f64>, ArchiveError> {
        let rows = self.u64()?;
        let cols = self.u64()?;
        let total = rows
            .checked_mul(cols)
            .and_then(|t| t.checked_mul(8))
            .ok_or(ArchiveError::Truncated)?;
        if total > self.remaining() as u64 {
            return Err(ArchiveError::Truncated);
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = self.f64()?;
            }
        }
        Ok(m)
    }
}
