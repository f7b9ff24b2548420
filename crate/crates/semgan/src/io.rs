//! PNG, palette and dataset-directory formats.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use semgan_core::codec::{LabelMap, Palette, PaletteEntry, RgbImage};
use semgan_core::shapes::{ShapesDataset, Z_ORDER};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PALETTE_FILE: &str = "palette.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| Error::file(path, e))?;
    w.write_image_data(data).map_err(|e| Error::file(path, e))?;
    w.finish().map_err(|e| Error::file(path, e))
}

/// Decodes an 8-bit PNG of the given color type into raw samples.
fn read_png(path: &Path, color: png::ColorType) -> Result<(usize, usize, Vec<u8>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| Error::file(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::file(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::file(path, e))?;
    if info.color_type != color || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::file(
            path,
            format!(
                "expected 8-bit {:?} PNG, found {:?} {:?}",
                color, info.bit_depth, info.color_type
            ),
        ));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

/// Label map as an 8-bit grayscale PNG; pixel value = label id.
pub fn save_label_png(path: &Path, m: &LabelMap) -> Result<()> {
    write_png(path, m.width(), m.height(), png::ColorType::Grayscale, m.labels())
}

pub fn load_label_png(path: &Path) -> Result<LabelMap> {
    let (w, h, data) = read_png(path, png::ColorType::Grayscale)?;
    LabelMap::new(w, h, data).map_err(|e| Error::file(path, e))
}

/// RGB image as an 8-bit PNG (round-half-up quantization).
pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    write_png(path, img.width(), img.height(), png::ColorType::Rgb, &img.to_u8())
}

pub fn load_rgb_png(path: &Path) -> Result<RgbImage> {
    let (w, h, data) = read_png(path, png::ColorType::Rgb)?;
    RgbImage::from_u8(w, h, &data).map_err(|e| Error::file(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PaletteRecord {
    id: u8,
    name: String,
    rgb: [u8; 3],
}

pub fn palette_to_json(p: &Palette) -> String {
    let records: Vec<PaletteRecord> = p
        .entries()
        .iter()
        .map(|e| PaletteRecord {
            id: e.id,
            name: e.name.clone(),
            rgb: e.rgb,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("palette serializes") + "\n"
}

pub fn save_palette(path: &Path, p: &Palette) -> Result<()> {
    write_text(path, &palette_to_json(p))
}

pub fn load_palette(path: &Path) -> Result<Palette> {
    let text = read_text(path)?;
    let records: Vec<PaletteRecord> = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
    let entries = records
        .into_iter()
        .map(|r| PaletteEntry {
            id: r.id,
            name: r.name,
            rgb: r.rgb,
        })
        .collect();
    Palette::new(entries).map_err(|e| Error::file(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Makes `dir` ready to receive a command's artifacts. An existing
/// non-empty directory is refused unless `force`, in which case only the
/// artifacts the command itself writes (`owned` names or `item_*.png`
/// when `owns_items`) are removed.
pub fn prepare_output_dir(dir: &Path, force: bool, owned: &[&str], owns_items: bool) -> Result<()> {
    if dir.exists() {
        let entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
            .collect::<Result<_>>()?;
        if !entries.is_empty() {
            if !force {
                return Err(Error::Usage(format!(
                    "output directory {} is not empty; pass --force to overwrite",
                    dir.display()
                )));
            }
            for p in entries {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                let item = owns_items && name.starts_with("item_") && name.ends_with(".png");
                if !(owned.contains(&name) || item) {
                    continue;
                }
                let res = if p.is_dir() {
                    fs::remove_dir_all(&p)
                } else {
                    fs::remove_file(&p)
                };
                res.map_err(|e| Error::io(&p, e))?;
            }
        }
    }
    create_dir(dir)
}

/// Echo of the generating configuration stored beside a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub generator: String,
    pub image_size: usize,
    pub square_side: usize,
    pub circle_radius: usize,
    pub rect_width_range: [usize; 2],
    pub rect_height_range: [usize; 2],
    pub seed: u64,
    pub item_count: usize,
    /// Painting order, bottom first.
    pub z_order: Vec<String>,
    pub palette: String,
}

pub fn item_file_name(i: usize) -> String {
    format!("item_{i:05}.png")
}

/// Writes one label PNG per item plus `palette.json` and `manifest.json`.
pub fn write_shapes_dataset(dir: &Path, ds: &ShapesDataset, force: bool) -> Result<()> {
    prepare_output_dir(dir, force, &[PALETTE_FILE, MANIFEST_FILE], true)?;
    for (i, (_, m)) in ds.items.iter().enumerate() {
        save_label_png(&dir.join(item_file_name(i)), m)?;
    }
    save_palette(&dir.join(PALETTE_FILE), &ds.palette)?;
    let c = &ds.config;
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        generator: "colored-shapes".into(),
        image_size: c.image_size,
        square_side: c.square_side,
        circle_radius: c.circle_radius,
        rect_width_range: [c.rect_width_range.0, c.rect_width_range.1],
        rect_height_range: [c.rect_height_range.0, c.rect_height_range.1],
        seed: c.seed,
        item_count: ds.items.len(),
        z_order: Z_ORDER.iter().map(|s| s.to_string()).collect(),
        palette: PALETTE_FILE.into(),
    };
    write_text(
        &dir.join(MANIFEST_FILE),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )
}

/// All `*.png` files of `dir` in lexicographic order, validated against
/// `palette` and required to share one size.
pub fn load_png_dataset(dir: &Path, palette: &Palette) -> Result<Vec<LabelMap>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::file(dir, "no PNG label maps found"));
    }
    let mut maps: Vec<LabelMap> = Vec::with_capacity(files.len());
    for f in &files {
        let m = load_label_png(f)?;
        if let Some(first) = maps.first() {
            if (m.width(), m.height()) != (first.width(), first.height()) {
                return Err(Error::file(
                    f,
                    format!(
                        "size {}x{} differs from {}x{} of {}",
                        m.width(),
                        m.height(),
                        first.width(),
                        first.height(),
                        files[0].display()
                    ),
                ));
            }
        }
        m.validate(palette.len()).map_err(|e| Error::file(f, e))?;
        maps.push(m);
    }
    Ok(maps)
}
