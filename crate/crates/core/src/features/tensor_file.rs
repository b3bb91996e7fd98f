//! Flat binary tensor files: a 16-byte header (`MELS`, u32 rows, u32 cols,
//! u32 dtype) followed by row-major little-endian values.

use std::fs;
use std::path::Path;

use super::FeatureError;

pub const TENSOR_MAGIC: &[u8; 4] = b"MELS";
/// dtype code for little-endian IEEE-754 binary32.
pub const TENSOR_DTYPE_F32: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

fn err(path: &Path, reason: impl Into<String>) -> FeatureError {
    FeatureError::TensorFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

pub fn write_tensor_file(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    values: &[f32],
) -> Result<(), FeatureError> {
    let path = path.as_ref();
    if values.len() != rows * cols {
        return Err(err(
            path,
            format!("{} values for a {rows} x {cols} tensor", values.len()),
        ));
    }
    let dim = |d: usize| u32::try_from(d).map_err(|_| err(path, "dimension exceeds u32"));
    let mut out = Vec::with_capacity(16 + 4 * values.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&dim(rows)?.to_le_bytes());
    out.extend_from_slice(&dim(cols)?.to_le_bytes());
    out.extend_from_slice(&TENSOR_DTYPE_F32.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| err(path, e.to_string()))
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<TensorFile, FeatureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| err(path, e.to_string()))?;
    if bytes.len() < 16 {
        return Err(err(path, "shorter than the 16-byte header"));
    }
    if &bytes[0..4] != TENSOR_MAGIC {
        return Err(err(path, "bad magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (rows, cols, dtype) = (word(4) as usize, word(8) as usize, word(12));
    if dtype != TENSOR_DTYPE_F32 {
        return Err(err(path, format!("unsupported dtype code {dtype}")));
    }
    let payload = &bytes[16..];
    if payload.len() != 4 * rows * cols {
        return Err(err(
            path,
            format!("expected {} payload bytes, found {}", 4 * rows * cols, payload.len()),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(TensorFile { rows, cols, values })
}
