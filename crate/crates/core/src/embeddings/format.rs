//! `LHAE` binary embedding files.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   b"LHAE"
//! version u16 (= 1)
//! flags   u8   bit0 = rows are unit normalized
//! count   u64
//! dim     u32
//! ids     count x (u32 byte length, UTF-8 bytes)
//! rows    count x dim x f32
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LHAE";
const VERSION: u16 = 1;
const FLAG_NORMALIZED: u8 = 1;

pub fn write_embeddings<W: Write>(m: &EmbeddingMatrix, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let flags = if m.unit_normalized() { FLAG_NORMALIZED } else { 0 };
    out.write_all(&[flags])?;
    out.write_all(&(m.len() as u64).to_le_bytes())?;
    out.write_all(&(m.dim() as u32).to_le_bytes())?;
    for id in m.unit_ids() {
        out.write_all(&(id.len() as u32).to_le_bytes())?;
        out.write_all(id.as_bytes())?;
    }
    for x in m.raw_data() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_embeddings(m, BufWriter::new(file))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, expected_total: u64) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated {
                expected: expected_total.max((self.pos + n) as u64),
                actual: self.buf.len() as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format("not an LHAE embedding file (bad magic)".into()));
    }
    c.pos = 4;
    let version = u16::from_le_bytes(c.take(2, 0)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported LHAE version {version}")));
    }
    let flags = c.take(1, 0)?[0];
    let count = u64::from_le_bytes(c.take(8, 0)?.try_into().unwrap());
    let dim = u32::from_le_bytes(c.take(4, 0)?.try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::Format("zero embedding dimension".into()));
    }
    let count = usize::try_from(count).map_err(|_| Error::Format("count overflow".into()))?;
    let mut ids = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = u32::from_le_bytes(c.take(4, 0)?.try_into().unwrap()) as usize;
        let raw = c.take(len, 0)?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::Format("unit id is not UTF-8".into()))?
            .to_string();
        ids.push(id);
    }
    let row_bytes = count as u64 * dim as u64 * 4;
    let expected = c.pos as u64 + row_bytes;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let data: Vec<f32> = bytes[c.pos..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let mut m = EmbeddingMatrix::new(ids, dim, data, false)?;
    // rows were normalized at write time; trust the flag instead of
    // renormalizing so the round trip stays bit-exact
    m.unit_normalized = flags & FLAG_NORMALIZED != 0;
    Ok(m)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    read_embeddings(&bytes)
}
