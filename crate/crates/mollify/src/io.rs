//! Raw float arrays, 16-bit graymaps and `key = value` sidecars.
//!
//! Raw files are the magic `MTF1`, row and column counts as little-endian
//! `u32`, then `rows * cols` little-endian `f64` values in row-major order.
//! Every write goes to a temporary file in the target directory and is
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{AppError, AppResult};

pub const RAW_MAGIC: &[u8; 4] = b"MTF1";

#[derive(Debug, Clone, PartialEq)]
pub struct RawArray {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| AppError::format(path, "not a file path"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(AppError::io(path, e));
    }
    Ok(())
}

pub fn write_raw(path: &Path, rows: usize, cols: usize, values: &[f64]) -> AppResult<()> {
    if rows * cols != values.len() {
        return Err(AppError::format(path, format!("{rows}x{cols} array with {} values", values.len())));
    }
    let dim = |d: usize| u32::try_from(d).map_err(|_| AppError::format(path, "dimension exceeds u32"));
    let mut bytes = Vec::with_capacity(12 + 8 * values.len());
    bytes.extend_from_slice(RAW_MAGIC);
    bytes.extend_from_slice(&dim(rows)?.to_le_bytes());
    bytes.extend_from_slice(&dim(cols)?.to_le_bytes());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_raw(path: &Path) -> AppResult<RawArray> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != RAW_MAGIC {
        return Err(AppError::format(path, "missing MTF1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 8 * rows * cols {
        return Err(AppError::format(path, format!("expected {} values for {rows}x{cols}", rows * cols)));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(RawArray { rows, cols, values })
}

/// Binary 16-bit PGM, affinely rescaled so the minimum maps to 0 and the
/// maximum to 65535. `comment` lines are embedded in the header.
pub fn write_pgm(path: &Path, rows: usize, cols: usize, values: &[f64], comment: &[String]) -> AppResult<()> {
    if rows * cols != values.len() {
        return Err(AppError::format(path, format!("{rows}x{cols} image with {} values", values.len())));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = hi - lo;
    let mut bytes = b"P5\n".to_vec();
    for line in comment {
        bytes.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    bytes.extend_from_slice(format!("{cols} {rows}\n65535\n").as_bytes());
    for v in values {
        let level = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    write_atomic(path, &bytes)
}

/// Path of the sidecar describing `path`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    path.with_file_name(name)
}

pub fn write_meta(path: &Path, entries: &[(String, String)]) -> AppResult<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    write_atomic(&meta_path(path), text.as_bytes())
}

pub fn read_meta(path: &Path) -> AppResult<Vec<(String, String)>> {
    let meta = meta_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| AppError::io(&meta, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

pub fn meta_value<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
