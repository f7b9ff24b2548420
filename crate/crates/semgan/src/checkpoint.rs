//! Binary checkpoint format.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` header length, a JSON
//! header (dtype, model config, step, tensor names and shapes), the raw
//! little-endian tensors (generator, discriminator, then the Adam `m` and
//! `v` moments of each), and a trailing CRC-32 of everything before it.

use std::fs;
use std::path::Path;

use semgan_core::gan::{build_models, Mode, ModelConfig, ModelState, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SEMGANCK";
pub const FORMAT_VERSION: u32 = 1;

/// Serializable mirror of [`ModelConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub mode: ModeName,
    pub image_size: usize,
    pub classes: usize,
    pub latent_dim: usize,
    pub kernel_size: usize,
    pub base_channels: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Semantic,
    Rgb,
}

impl From<Mode> for ModeName {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Semantic => ModeName::Semantic,
            Mode::Rgb => ModeName::Rgb,
        }
    }
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Semantic => Mode::Semantic,
            ModeName::Rgb => Mode::Rgb,
        }
    }
}

impl From<&ModelConfig> for ModelSpec {
    fn from(c: &ModelConfig) -> Self {
        Self {
            mode: c.mode.into(),
            image_size: c.image_size,
            classes: c.classes,
            latent_dim: c.latent_dim,
            kernel_size: c.kernel_size,
            base_channels: c.base_channels,
            depth: c.depth,
        }
    }
}

impl From<&ModelSpec> for ModelConfig {
    fn from(s: &ModelSpec) -> Self {
        Self {
            mode: s.mode.into(),
            image_size: s.image_size,
            classes: s.classes,
            latent_dim: s.latent_dim,
            kernel_size: s.kernel_size,
            base_channels: s.base_channels,
            depth: s.depth,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: String,
    model: ModelSpec,
    step: u64,
    generator: Vec<TensorInfo>,
    discriminator: Vec<TensorInfo>,
}

/// Tensors in file order.
fn tensors<T: Scalar>(s: &ModelState<T>) -> impl Iterator<Item = &Vec<T>> {
    s.generator
        .params
        .iter()
        .map(|p| &p.data)
        .chain(s.discriminator.params.iter().map(|p| &p.data))
        .chain(s.gen_moments.m.iter())
        .chain(s.gen_moments.v.iter())
        .chain(s.disc_moments.m.iter())
        .chain(s.disc_moments.v.iter())
}

fn tensors_mut<T: Scalar>(s: &mut ModelState<T>) -> impl Iterator<Item = &mut Vec<T>> {
    s.generator
        .params
        .iter_mut()
        .map(|p| &mut p.data)
        .chain(s.discriminator.params.iter_mut().map(|p| &mut p.data))
        .chain(s.gen_moments.m.iter_mut())
        .chain(s.gen_moments.v.iter_mut())
        .chain(s.disc_moments.m.iter_mut())
        .chain(s.disc_moments.v.iter_mut())
}

pub fn encode<T: Scalar>(state: &ModelState<T>) -> Vec<u8> {
    let info = |ps: &semgan_core::gan::ParamSet<T>| {
        ps.params
            .iter()
            .map(|p| TensorInfo {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect()
    };
    let header = Header {
        dtype: T::DTYPE.into(),
        model: ModelSpec::from(&state.config),
        step: state.step,
        generator: info(&state.generator),
        discriminator: info(&state.discriminator),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors(state) {
        for v in t {
            v.write_le(&mut out);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn u32_at(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

/// Decodes a checkpoint; `path` is only used in error messages.
pub fn decode<T: Scalar>(bytes: &[u8], path: &Path) -> Result<ModelState<T>> {
    let bad = |msg: String| Error::file(path, msg);
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a semgan checkpoint (bad magic)".into()));
    }
    let version = u32_at(bytes, 8).ok_or_else(|| bad("truncated checkpoint".into()))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!(
            "unsupported checkpoint format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    if bytes.len() < 16 + 4 {
        return Err(bad("truncated checkpoint".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(bad("checkpoint is corrupted (checksum mismatch)".into()));
    }
    let hlen = u32_at(body, 12).expect("length checked") as usize;
    let hbytes = body
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated checkpoint header".into()))?;
    let header: Header = serde_json::from_slice(hbytes).map_err(|e| bad(format!("invalid header: {e}")))?;
    if header.dtype != T::DTYPE {
        return Err(bad(format!("checkpoint stores {} tensors, expected {}", header.dtype, T::DTYPE)));
    }
    let cfg = ModelConfig::from(&header.model);
    let mut state: ModelState<T> = build_models(&cfg, 0).map_err(|e| bad(format!("invalid model config: {e}")))?;
    let layout_matches = |ps: &semgan_core::gan::ParamSet<T>, info: &[TensorInfo]| {
        ps.params.len() == info.len()
            && ps.params.iter().zip(info).all(|(p, i)| p.name == i.name && p.shape == i.shape)
    };
    if !layout_matches(&state.generator, &header.generator)
        || !layout_matches(&state.discriminator, &header.discriminator)
    {
        return Err(bad("tensor layout does not match the model config".into()));
    }
    let mut data = &body[16 + hlen..];
    for t in tensors_mut(&mut state) {
        let need = t.len() * T::BYTES;
        if data.len() < need {
            return Err(bad("truncated tensor data".into()));
        }
        for (v, chunk) in t.iter_mut().zip(data[..need].chunks_exact(T::BYTES)) {
            *v = T::read_le(chunk);
        }
        data = &data[need..];
    }
    if !data.is_empty() {
        return Err(bad(format!("{} unexpected trailing bytes", data.len())));
    }
    state.step = header.step;
    state.validate().map_err(|e| bad(e.to_string()))?;
    Ok(state)
}

pub fn save<T: Scalar>(path: &Path, state: &ModelState<T>) -> Result<()> {
    fs::write(path, encode(state)).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<ModelState<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
