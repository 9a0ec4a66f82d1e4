//! Feature and posterior matrix files.
//!
//! `SRF1` layout: the ASCII magic `SRF1`, `u32` rows, `u32` cols, then
//! `rows * cols` little-endian `f32` values in row-major order. The CSV
//! alternative is one frame per line, comma-separated, no header.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const SRF1_MAGIC: &[u8; 4] = b"SRF1";

pub fn encode_srf1(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + m.data().len() * 4);
    out.extend_from_slice(SRF1_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_srf1(bytes: &[u8]) -> Result<Matrix> {
    let mut r = ByteReader::new(bytes, "SRF1 matrix");
    r.expect_magic(SRF1_MAGIC)?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let data = r.f32s(rows * cols)?;
    r.finish()?;
    Matrix::from_vec(rows, cols, data)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f32>().map_err(|e| {
                    Error::format("CSV matrix", format!("line {}: {cell:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| Error::format("CSV matrix", e.to_string()))
}

/// Loads a matrix, picking SRF1 when the file starts with the magic and CSV otherwise.
pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(SRF1_MAGIC) {
        return decode_srf1(&bytes).map_err(|e| with_path(e, path));
    }
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::format(path.display().to_string(), "neither SRF1 nor UTF-8 CSV"))?;
    matrix_from_csv(&text).map_err(|e| with_path(e, path))
}

pub fn save_matrix(m: &Matrix, path: &Path) -> Result<()> {
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    let bytes = if is_csv {
        matrix_to_csv(m).into_bytes()
    } else {
        encode_srf1(m)
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { what, detail } => Error::Format {
            what: format!("{what} ({})", path.display()),
            detail,
        },
        other => other,
    }
}

/// Little-endian cursor shared by the binary formats.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            what,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(
                    self.what,
                    format!("truncated at byte {} (wanted {n} more)", self.pos),
                )
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::format(
                self.what,
                format!("bad magic {:?}", String::from_utf8_lossy(got)),
            ));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::format(self.what, "element count overflows"))?;
        let b = self.take(len)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.what,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}
