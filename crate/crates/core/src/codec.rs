//! Conversions between label maps, class-probability volumes and RGB images.
//!
//! A [`LabelMap`] is the canonical semantic image. One-hot encoding lifts it
//! onto the class simplex, [`collapse`] takes it back via argmax, and a
//! [`Palette`] maps labels to colors. [`quantize_rgb`] goes the other way for
//! RGB generator outputs, which is how off-palette ("spurious") pixels are
//! counted.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, shape_err, Error, Result};

/// Maximum class count representable with 8-bit label storage.
pub const MAX_CLASSES: usize = 256;

/// Tolerance on the per-pixel simplex sum.
pub const SIMPLEX_TOL: f64 = 1e-5;

/// Row-major grid of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(shape_err!(
                "label buffer has {} entries, expected {}x{}={}",
                labels.len(),
                width,
                height,
                width * height
            ));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    /// Checks that every label is below `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= classes) {
            Some(pixel) => Err(Error::LabelOutOfRange {
                pixel,
                label: self.labels[pixel] as u32,
                classes,
            }),
            None => Ok(()),
        }
    }

    /// Number of pixels carrying `label`.
    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaletteEntry {
    pub id: u8,
    pub name: String,
    pub rgb: [u8; 3],
}

/// Ordered bijection between label ids `0..K` and RGB colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.len() > MAX_CLASSES {
            return Err(config_err!(
                "palette has {} classes, at most {} are supported",
                entries.len(),
                MAX_CLASSES
            ));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.id as usize != i {
                return Err(config_err!(
                    "palette entry {} has id {}, ids must be 0..K-1 in order",
                    i,
                    e.id
                ));
            }
            if let Some(prev) = entries[..i].iter().find(|p| p.rgb == e.rgb) {
                return Err(config_err!(
                    "palette colors must be distinct: '{}' and '{}' share {:?}",
                    prev.name,
                    e.name,
                    e.rgb
                ));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a palette from `(name, rgb)` pairs, assigning ids in order.
    pub fn from_colors<S: Into<String>>(colors: impl IntoIterator<Item = (S, [u8; 3])>) -> Result<Self> {
        let entries = colors
            .into_iter()
            .enumerate()
            .map(|(i, (name, rgb))| PaletteEntry {
                id: i.min(u8::MAX as usize) as u8,
                name: name.into(),
                rgb,
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn rgb(&self, label: u8) -> Option<[u8; 3]> {
        self.entries.get(label as usize).map(|e| e.rgb)
    }

    /// Palette colors scaled to `[0,1]`.
    pub fn unit_colors(&self) -> Vec<[f64; 3]> {
        self.entries
            .iter()
            .map(|e| e.rgb.map(|c| c as f64 / 255.0))
            .collect()
    }
}

/// Per-pixel distributions over `classes` labels, row-major with the class
/// axis innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbVolume {
    width: usize,
    height: usize,
    classes: usize,
    probs: Vec<f64>,
}

impl ClassProbVolume {
    /// Validates shape, range and the simplex constraint.
    pub fn new(width: usize, height: usize, classes: usize, probs: Vec<f64>) -> Result<Self> {
        if classes == 0 {
            return Err(config_err!("class count must be at least 1"));
        }
        if probs.len() != width * height * classes {
            return Err(shape_err!(
                "probability buffer has {} entries, expected {}",
                probs.len(),
                width * height * classes
            ));
        }
        for (pixel, p) in probs.chunks_exact(classes).enumerate() {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(shape_err!("pixel {} has a probability outside [0,1]", pixel));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(shape_err!("pixel {} sums to {}, not 1", pixel, sum));
            }
        }
        Ok(Self {
            width,
            height,
            classes,
            probs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.classes;
        &self.probs[start..start + self.classes]
    }
}

/// Row-major RGB image with channel values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(shape_err!(
                "pixel buffer has {} entries, expected {}",
                pixels.len(),
                width * height * 3
            ));
        }
        if let Some(i) = pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(shape_err!("channel value {} at index {} outside [0,1]", pixels[i], i));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Round-half-up conversion to 8-bit channels.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| libm::floor(v * 255.0 + 0.5).clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&b| b as f64 / 255.0).collect())
    }
}

/// Lifts a label map onto the class simplex.
pub fn one_hot_encode(m: &LabelMap, classes: usize) -> Result<ClassProbVolume> {
    if classes == 0 || classes > MAX_CLASSES {
        return Err(config_err!("class count {} outside 1..={}", classes, MAX_CLASSES));
    }
    m.validate(classes)?;
    let mut probs = vec![0.0; m.labels.len() * classes];
    for (i, &l) in m.labels.iter().enumerate() {
        probs[i * classes + l as usize] = 1.0;
    }
    Ok(ClassProbVolume {
        width: m.width,
        height: m.height,
        classes,
        probs,
    })
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Argmax over the class axis.
pub fn collapse(v: &ClassProbVolume) -> LabelMap {
    let labels = v
        .probs
        .chunks_exact(v.classes)
        .map(|p| argmax(p) as u8)
        .collect();
    LabelMap {
        width: v.width,
        height: v.height,
        labels,
    }
}

pub fn to_rgb(m: &LabelMap, p: &Palette) -> Result<RgbImage> {
    m.validate(p.len())?;
    let colors = p.unit_colors();
    let mut pixels = Vec::with_capacity(m.labels.len() * 3);
    for &l in &m.labels {
        pixels.extend_from_slice(&colors[l as usize]);
    }
    Ok(RgbImage {
        width: m.width,
        height: m.height,
        pixels,
    })
}

/// Nearest palette entry by squared Euclidean distance in unit RGB space,
/// returning `(label, squared distance)`.
pub fn nearest_color(rgb: [f64; 3], colors: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in colors.iter().enumerate() {
        let d = (rgb[0] - c[0]) * (rgb[0] - c[0])
            + (rgb[1] - c[1]) * (rgb[1] - c[1])
            + (rgb[2] - c[2]) * (rgb[2] - c[2]);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn quantize_rgb(img: &RgbImage, p: &Palette) -> Result<LabelMap> {
    if p.is_empty() {
        return Err(config_err!("cannot quantize against an empty palette"));
    }
    let colors = p.unit_colors();
    let labels = img
        .pixels
        .chunks_exact(3)
        .map(|px| nearest_color([px[0], px[1], px[2]], &colors).0 as u8)
        .collect();
    Ok(LabelMap {
        width: img.width,
        height: img.height,
        labels,
    })
}

/// Number of pixels farther than `tol` from every palette color.
pub fn spurious_pixel_count(img: &RgbImage, p: &Palette, tol: f64) -> usize {
    let colors = p.unit_colors();
    let tol = tol.max(0.0);
    let tol2 = tol * tol;
    img.pixels
        .chunks_exact(3)
        .filter(|px| nearest_color([px[0], px[1], px[2]], &colors).1 > tol2)
        .count()
}

/// Fraction of pixels farther than `tol` from every palette color. Negative
/// tolerances are treated as zero.
pub fn spurious_pixel_rate(img: &RgbImage, p: &Palette, tol: f64) -> f64 {
    let total = img.width * img.height;
    if total == 0 {
        return 0.0;
    }
    spurious_pixel_count(img, p, tol) as f64 / total as f64
}
