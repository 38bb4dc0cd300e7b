//! Gradient matrix files: CSV with a `g0,g1,...` header, or the raw
//! little-endian `MDXG` binary (magic, u32 m, u32 d, m·d f64 row-major).

use std::fs;
use std::path::Path;

use super::GradientMatrix;
use crate::error::{MedixError, Result};

const MAGIC: &[u8; 4] = b"MDXG";

pub fn write_csv(g: &GradientMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..g.cols()).map(|j| format!("g{j}")))?;
    for row in g.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| MedixError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<GradientMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    for (j, h) in header.iter().enumerate() {
        if h.trim() != format!("g{j}") {
            return Err(MedixError::format(path, format!("column {j} should be named g{j}, found `{h}`")));
        }
    }
    let cols = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| MedixError::format(path, format!("bad number `{field}` on row {rows}")))?;
            data.push(v);
        }
        rows += 1;
    }
    GradientMatrix::new(rows, cols, data)
}

pub fn to_binary(g: &GradientMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * g.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(g.cols() as u32).to_le_bytes());
    for v in g.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_binary(bytes: &[u8]) -> std::result::Result<GradientMatrix, String> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err("missing MDXG magic".into());
    }
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != m * d * 8 {
        return Err(format!("expected {} payload bytes for {m}x{d}, found {}", m * d * 8, body.len()));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    GradientMatrix::new(m, d, data).map_err(|e| e.to_string())
}

pub fn write_binary(g: &GradientMatrix, path: &Path) -> Result<()> {
    fs::write(path, to_binary(g)).map_err(|e| MedixError::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<GradientMatrix> {
    let bytes = fs::read(path).map_err(|e| MedixError::io(path, e))?;
    from_binary(&bytes).map_err(|reason| MedixError::format(path, reason))
}

/// Reads either format, sniffing the magic bytes.
pub fn read_any(path: &Path) -> Result<GradientMatrix> {
    let bytes = fs::read(path).map_err(|e| MedixError::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        from_binary(&bytes).map_err(|reason| MedixError::format(path, reason))
    } else {
        read_csv(path)
    }
}
