//! Clip-feature file formats.
//!
//! The binary layout is little-endian: the magic bytes `VPSF`, a `u32`
//! version (always 1), `u32` rows, `u32` cols, then `rows * cols` `f32`
//! values in row-major order. Files whose extension is `.csv` are read and
//! written as plain text instead, one clip per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::ClipFeatures;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VPSF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a feature matrix, dispatching on the file extension.
pub fn read_features(path: impl AsRef<Path>, video_id: &str) -> Result<ClipFeatures> {
    let path = path.as_ref();
    if is_csv(path) {
        read_csv(path, video_id)
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        decode(&bytes, video_id).map_err(|message| Error::FeatureFormat {
            path: path.to_path_buf(),
            message,
        })?
    }
}

/// Writes a feature matrix, dispatching on the file extension.
///
/// The binary format narrows every value to `f32`; values that were
/// themselves read from a binary file round-trip bit-exactly.
pub fn write_features(path: impl AsRef<Path>, features: &ClipFeatures) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_csv(path) {
        encode_csv(features).into_bytes()
    } else {
        encode(features)
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode(features: &ClipFeatures) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * features.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(features.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    for &v in features.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Outer error is a format problem, inner is a content (validation) problem.
pub fn decode(bytes: &[u8], video_id: &str) -> std::result::Result<Result<ClipFeatures>, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic, expected VPSF".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| "header size overflow".to_string())?;
    if bytes.len() != expected {
        return Err(format!(
            "payload length {} does not match {rows}x{cols}",
            bytes.len() - HEADER_LEN
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(ClipFeatures::new(video_id, rows, cols, data))
}

fn read_csv(path: &Path, video_id: &str) -> Result<ClipFeatures> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: cannot parse {field:?}", lineno + 1)))?;
            data.push(v);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(bad(format!(
                    "line {} has {width} values, expected {c}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    ClipFeatures::new(video_id, rows, cols.unwrap_or(0), data)
}

fn encode_csv(features: &ClipFeatures) -> String {
    let mut out = String::new();
    for t in 0..features.rows() {
        let row: Vec<String> = features.row(t).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
