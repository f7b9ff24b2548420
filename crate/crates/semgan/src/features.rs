//! External feature files: a one-line JSON header `{"count": N, "dim": D}`
//! followed by `N * D` little-endian `f32` values, one vector per image.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureHeader {
    pub count: usize,
    pub dim: usize,
}

/// Feature vectors of one image set, widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub count: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl FeatureFile {
    pub fn as_external(&self) -> (&[f64], usize) {
        (&self.values, self.dim)
    }
}

pub fn encode_features(dim: usize, values: &[f32]) -> Vec<u8> {
    assert!(dim > 0 && values.len().is_multiple_of(dim), "values must hold whole vectors");
    let header = FeatureHeader {
        count: values.len() / dim,
        dim,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureFile> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::file(path, "missing JSON header line"))?;
    let header: FeatureHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::file(path, format!("invalid header: {e}")))?;
    if header.dim == 0 || header.count < 2 {
        return Err(Error::file(path, "need dim >= 1 and at least 2 vectors"));
    }
    let body = &bytes[nl + 1..];
    let expected = header.count * header.dim * 4;
    if body.len() != expected {
        return Err(Error::file(
            path,
            format!("expected {expected} bytes of f32 data, found {}", body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::file(path, "non-finite feature value"));
    }
    Ok(FeatureFile {
        count: header.count,
        dim: header.dim,
        values,
    })
}

pub fn load_features(path: &Path) -> Result<FeatureFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

pub fn save_features(path: &Path, dim: usize, values: &[f32]) -> Result<()> {
    fs::write(path, encode_features(dim, values)).map_err(|e| Error::io(path, e))
}
