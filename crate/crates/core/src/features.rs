//! The feature matrix and its on-disk EDMF encoding.
//!
//! Layout (little-endian throughout):
//!
//! | bytes | field                                              |
//! |-------|----------------------------------------------------|
//! | 4     | magic `EDMF`                                       |
//! | 4     | format version, `u32` = 1                          |
//! | 8     | rows `n`, `u64`                                    |
//! | 8     | dim `D`, `u64`                                     |
//! | 4     | flags, `u32` (bit 0: per-frame embeddings unit-normalized) |
//! | n·D·4 | payload, `f32`, row-major                          |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EDMF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
pub const FLAG_FRAMES_NORMALIZED: u32 = 1;

const UNIT_NORM_TOL: f64 = 1e-5;

/// Dense row-major `n × D` matrix of per-sample features.
///
/// Entries are held as `f64`; values read from an EDMF file are exact widenings
/// of the stored `f32`s, so a load/write cycle reproduces the file bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    row_norm_flag: bool,
    frames_normalized: bool,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Empty("feature matrix has no rows"));
        }
        if dim == 0 {
            return Err(Error::Empty("feature matrix has zero dimension"));
        }
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{dim} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            rows,
            dim,
            data,
            row_norm_flag: false,
            frames_normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("feature matrix has no rows"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    /// Marks every row as unit-normalized after checking it.
    pub fn with_unit_rows(mut self) -> Result<Self> {
        for i in 0..self.rows {
            let norm = self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotNormalized { row: i, norm });
            }
        }
        self.row_norm_flag = true;
        Ok(self)
    }

    pub fn with_frames_normalized(mut self, flag: bool) -> Self {
        self.frames_normalized = flag;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_norm_flag(&self) -> bool {
        self.row_norm_flag
    }

    pub fn frames_normalized(&self) -> bool {
        self.frames_normalized
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("row selection is empty"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            dim: self.dim,
            data,
            row_norm_flag: self.row_norm_flag,
            frames_normalized: self.frames_normalized,
        })
    }

    /// Appends one row; used by the scenario generators.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "pushed row has {} columns, expected {}",
                row.len(),
                self.dim
            )));
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: self.rows,
                col,
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        self.row_norm_flag = false;
        Ok(())
    }

    /// Checks that each of `segments` equal slices of every row has unit norm.
    pub fn check_segment_norms(&self, segments: usize, tol: f64) -> Result<()> {
        if segments == 0 || !self.dim.is_multiple_of(segments) {
            return Err(Error::InvalidParameter(format!(
                "dim {} is not divisible into {segments} segments",
                self.dim
            )));
        }
        let seg = self.dim / segments;
        for (i, row) in self.iter_rows().enumerate() {
            for chunk in row.chunks_exact(seg) {
                let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > tol {
                    return Err(Error::NotNormalized { row: i, norm });
                }
            }
        }
        Ok(())
    }
}

/// Reads an EDMF file. When `expected_rows` is given, the header row count must match it.
pub fn load_features(path: impl AsRef<Path>, expected_rows: Option<usize>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut reader = BufReader::new(file);
    let m = decode(&mut reader, file_len).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    if let Some(expected) = expected_rows {
        if m.rows != expected {
            return Err(Error::RowCountMismatch {
                expected,
                found: m.rows,
            });
        }
    }
    Ok(m)
}

/// Decodes an EDMF stream whose total length is `total_len` bytes.
pub fn decode<R: Read>(reader: &mut R, total_len: u64) -> Result<FeatureMatrix> {
    let io = |e| Error::io("<stream>", e);
    if total_len < HEADER_LEN as u64 {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            found: total_len,
        });
    }
    let mut header = [0u8; HEADER_LEN];
    reader.read_exact(&mut header).map_err(io)?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let dim = u64::from_le_bytes(header[16..24].try_into().unwrap());
    let flags = u32::from_le_bytes(header[24..28].try_into().unwrap());

    let payload = rows
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::InvalidParameter(format!("header shape {rows}x{dim} overflows")))?;
    let expected = HEADER_LEN as u64 + payload;
    if total_len < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: total_len,
        });
    }
    if total_len > expected {
        return Err(Error::InvalidParameter(format!(
            "{} trailing bytes after payload",
            total_len - expected
        )));
    }
    let (rows, dim) = (rows as usize, dim as usize);
    if rows == 0 || dim == 0 {
        return Err(Error::Empty("EDMF header declares an empty matrix"));
    }

    let mut data = Vec::with_capacity(rows * dim);
    let mut buf = vec![0u8; 4 * dim];
    for r in 0..rows {
        reader.read_exact(&mut buf).map_err(io)?;
        for (c, b) in buf.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
            data.push(v as f64);
        }
    }
    Ok(FeatureMatrix::new(rows, dim, data)?.with_frames_normalized(flags & FLAG_FRAMES_NORMALIZED != 0))
}

/// Encodes `m` as EDMF. Entries are narrowed to `f32`.
pub fn encode<W: Write>(m: &FeatureMatrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.dim as u64).to_le_bytes())?;
    let flags = if m.frames_normalized {
        FLAG_FRAMES_NORMALIZED
    } else {
        0
    };
    w.write_all(&flags.to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 * m.dim);
    for row in m.iter_rows() {
        buf.clear();
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_features(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(m, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
