//! Matrix files, index lists and JSON reports.
//!
//! `tokm` layout (all little-endian):
//!
//! | offset | size  | field                         |
//! |--------|-------|-------------------------------|
//! | 0      | 4     | magic `b"TOKM"`               |
//! | 4      | 4     | version, `u32` (currently 1)  |
//! | 8      | 8     | n, `u64`                      |
//! | 16     | 8     | d, `u64`                      |
//! | 24     | 4·n·d | row-major `f32` payload       |
//!
//! Nothing may follow the payload. Values are widened to `f64` on read and
//! narrowed with round-to-nearest-even on write.
//!
//! `csv` holds one token per line as comma-separated decimals; a single
//! leading line starting with `#` is treated as a header and skipped.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{ApetError, Result};
use crate::matrix::TokenMatrix;

pub const TOKM_MAGIC: [u8; 4] = *b"TOKM";
pub const TOKM_VERSION: u32 = 1;
pub const TOKM_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Tokm,
    Csv,
}

impl FromStr for MatrixFormat {
    type Err = ApetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tokm" => Ok(MatrixFormat::Tokm),
            "csv" => Ok(MatrixFormat::Csv),
            other => Err(ApetError::InvalidArgument(format!("unknown matrix format {other:?}"))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixFormat::Tokm => "tokm",
            MatrixFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixFileHeader {
    pub version: u32,
    pub n: u64,
    pub d: u64,
}

impl MatrixFileHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(ApetError::TruncatedPayload {
                expected: TOKM_HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != TOKM_MAGIC {
            return Err(ApetError::BadMagic(magic));
        }
        if bytes.len() < TOKM_HEADER_LEN {
            return Err(ApetError::TruncatedPayload {
                expected: TOKM_HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != TOKM_VERSION {
            return Err(ApetError::UnsupportedVersion(version));
        }
        Ok(Self {
            version,
            n: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            d: u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
        })
    }

    pub fn payload_len(&self) -> Option<u64> {
        self.n.checked_mul(self.d)?.checked_mul(4)
    }
}

pub fn decode_tokm(bytes: &[u8]) -> Result<TokenMatrix> {
    let header = MatrixFileHeader::parse(bytes)?;
    let expected = header.payload_len().ok_or_else(|| {
        ApetError::InvalidShape(format!("{}x{} overflows", header.n, header.d))
    })?;
    let found = (bytes.len() - TOKM_HEADER_LEN) as u64;
    if found < expected {
        return Err(ApetError::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(ApetError::TrailingBytes(found - expected));
    }
    let data: Vec<f64> = bytes[TOKM_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    TokenMatrix::new(header.n as usize, header.d as usize, data)
}

pub fn encode_tokm(x: &TokenMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(TOKM_HEADER_LEN + 4 * x.as_slice().len());
    out.extend_from_slice(&TOKM_MAGIC);
    out.extend_from_slice(&TOKM_VERSION.to_le_bytes());
    out.extend_from_slice(&(x.n() as u64).to_le_bytes());
    out.extend_from_slice(&(x.d() as u64).to_le_bytes());
    for (pos, &v) in x.as_slice().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(ApetError::NonFiniteValue {
                row: pos / x.d(),
                col: pos % x.d(),
            });
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<TokenMatrix> {
    let mut d = None;
    let mut data = Vec::new();
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('#')) {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| ApetError::Parse {
                line: lineno + 1,
                msg: format!("{field:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(ApetError::NonFiniteValue { row: n, col: count });
            }
            data.push(v);
            count += 1;
        }
        match d {
            None => d = Some(count),
            Some(expected) if expected != count => {
                return Err(ApetError::RaggedCsv {
                    line: lineno + 1,
                    expected,
                    found: count,
                })
            }
            _ => {}
        }
        n += 1;
    }
    TokenMatrix::new(n, d.unwrap_or(0), data)
}

/// One row per line, values in shortest round-trip decimal form.
pub fn format_csv(x: &TokenMatrix) -> String {
    let mut out = String::new();
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<TokenMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ApetError::io(path, e))?;
    match format {
        MatrixFormat::Tokm => decode_tokm(&bytes),
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| ApetError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
            parse_csv(&text)
        }
    }
}

pub fn write_matrix(path: impl AsRef<Path>, format: MatrixFormat, x: &TokenMatrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Tokm => encode_tokm(x)?,
        MatrixFormat::Csv => format_csv(x).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| ApetError::io(path, e))
}

/// Reads whitespace- or comma-separated token indices.
pub fn read_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ApetError::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|e| ApetError::Parse {
                line: lineno + 1,
                msg: format!("{tok:?}: {e}"),
            })?);
        }
    }
    Ok(out)
}

pub fn write_indices(path: impl AsRef<Path>, indices: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let text: String = indices.iter().map(|i| format!("{i}\n")).collect();
    fs::write(path, text).map_err(|e| ApetError::io(path, e))
}

/// Pretty JSON with struct field order as key order, plus a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(value)?).map_err(|e| ApetError::io(path, e))
}

pub fn write_report(path: impl AsRef<Path>, report: &crate::compression::CompressionReport) -> Result<()> {
    write_json(path, report)
}
