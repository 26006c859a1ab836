//! Little-endian `f32` row-major matrices behind a fixed header:
//! 8-byte magic, `u32` version, `u64` rows, `u64` cols. MC tensors append
//! `u32` passes and `u32` classes to the header.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 8] = *b"ABSTMTRX";
pub const MC_MAGIC: [u8; 8] = *b"ABSTMCTS";
pub const FORMAT_VERSION: u32 = 1;

const BASE_HEADER: usize = 8 + 4 + 8 + 8;
const MC_HEADER: usize = BASE_HEADER + 4 + 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { what: "matrix data", expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// MC tensor: one `passes x classes` block per row.
#[derive(Debug, Clone, PartialEq)]
pub struct McTensor {
    pub passes: usize,
    pub classes: usize,
    pub matrix: Matrix,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode(magic: [u8; 8], m: &Matrix, extension: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(MC_HEADER + m.data.len() * 4);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols as u64).to_le_bytes());
    for v in extension {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in &m.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(bytes))
}

/// Writes `m` and returns the SHA-256 of the file.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<String> {
    write_bytes(path, &encode(MATRIX_MAGIC, m, &[]))
}

pub fn write_mc(path: &Path, t: &McTensor) -> Result<String> {
    write_bytes(path, &encode(MC_MAGIC, &t.matrix, &[t.passes as u32, t.classes as u32]))
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

/// Validates the header and body length, then the checksum.
fn decode(path: &Path, bytes: &[u8], magic: [u8; 8], header: usize, sha256: Option<&str>) -> Result<Matrix> {
    let shown = || path.display().to_string();
    if bytes.len() < 8 || bytes[..8] != magic {
        return Err(Error::BadMagic { path: shown() });
    }
    if bytes.len() < header {
        return Err(Error::RowCountMismatch { path: shown(), detail: format!("header truncated at {} bytes", bytes.len()) });
    }
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { path: shown(), found: version, expected: FORMAT_VERSION });
    }
    let rows = u64_at(bytes, 12) as usize;
    let cols = u64_at(bytes, 20) as usize;
    let body = bytes.len() - header;
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
    if expected != Some(body) {
        let stored = body / 4 / cols.max(1);
        return Err(Error::RowCountMismatch {
            path: shown(),
            detail: format!("header declares {rows} rows x {cols} cols, file holds {stored} complete rows"),
        });
    }
    if let Some(want) = sha256 {
        if sha256_hex(bytes) != want {
            return Err(Error::ChecksumMismatch { path: shown() });
        }
    }
    let data = bytes[header..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    Matrix::new(rows, cols, data)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path, sha256: Option<&str>) -> Result<Matrix> {
    decode(path, &read_bytes(path)?, MATRIX_MAGIC, BASE_HEADER, sha256)
}

pub fn read_mc(path: &Path, sha256: Option<&str>) -> Result<McTensor> {
    let bytes = read_bytes(path)?;
    let matrix = decode(path, &bytes, MC_MAGIC, MC_HEADER, sha256)?;
    let passes = u32_at(&bytes, BASE_HEADER) as usize;
    let classes = u32_at(&bytes, BASE_HEADER + 4) as usize;
    if passes * classes != matrix.cols {
        return Err(Error::malformed(path, format!("{passes} passes x {classes} classes != {} columns", matrix.cols)));
    }
    Ok(McTensor { passes, classes, matrix })
}
