//! Vector files: a binary little-endian format and a one-vector-per-line
//! text format.
//!
//! Binary layout: `HQV1`, count (u64), d_orig (u32), then `count·d_orig`
//! f64 values, row-major.

use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};

pub const MAGIC: &[u8; 4] = b"HQV1";
const HEADER_BYTES: usize = 16;

/// Rows of equal length, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectors {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Vectors {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        ensure!(!rows.is_empty(), "no vectors");
        ensure!(dim >= 1, "vector dimension must be at least 1");
        for (i, row) in rows.iter().enumerate() {
            ensure!(row.len() == dim, "vector {i} has {} values, expected {dim}", row.len());
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                bail!("vector {i} has a non-finite value at coordinate {j}");
            }
        }
        Ok(Self { dim, rows })
    }
}

pub fn parse_binary(bytes: &[u8]) -> Result<Vectors> {
    ensure!(bytes.len() >= HEADER_BYTES, "vector file is {} bytes, shorter than its header", bytes.len());
    ensure!(&bytes[..4] == MAGIC, "not a vector file (bad magic)");
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    ensure!(count > 0, "vector file holds no vectors");
    ensure!(dim > 0, "vector dimension must be at least 1");
    let body = &bytes[HEADER_BYTES..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dim))
        .and_then(|n| n.checked_mul(8))
        .context("vector file header overflows")?;
    ensure!(body.len() == expected, "vector file body is {} bytes, header implies {expected}", body.len());
    let rows = body
        .chunks_exact(dim * 8)
        .map(|row| row.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Vectors::new(dim, rows)
}

pub fn to_binary(v: &Vectors) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + v.rows.len() * v.dim * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(v.rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(v.dim as u32).to_le_bytes());
    for x in v.rows.iter().flatten() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Whitespace- or comma-separated values; blank lines and `#` comments are skipped.
pub fn parse_text(text: &str) -> Result<Vectors> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().with_context(|| format!("line {}: cannot parse `{s}`", n + 1)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    ensure!(!rows.is_empty(), "vector file holds no vectors");
    Vectors::new(rows[0].len(), rows)
}

pub fn to_text(v: &Vectors) -> String {
    let mut out = String::new();
    for row in &v.rows {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x:?}").unwrap();
        }
        out.push('\n');
    }
    out
}
