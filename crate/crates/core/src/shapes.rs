//! The Colored Shapes dataset: a square enumerated over every position, plus a
//! randomly placed circle and rectangle, rendered directly as label maps.

use alloc::vec::Vec;

use crate::codec::{LabelMap, Palette};
use crate::error::{config_err, Error, Result};
use crate::rng::{self, Domain, Rng};

pub const BACKGROUND: u8 = 0;
pub const CIRCLE: u8 = 1;
pub const RECTANGLE: u8 = 2;
pub const SQUARE: u8 = 3;

/// Painting order, bottom first.
pub const Z_ORDER: [&str; 4] = ["background", "rectangle", "square", "circle"];

/// Upper bound on rectangle placements tried before giving up on an item.
const MAX_RECT_ATTEMPTS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapesConfig {
    pub image_size: usize,
    pub square_side: usize,
    pub circle_radius: usize,
    /// Inclusive rectangle width range.
    pub rect_width_range: (usize, usize),
    /// Inclusive rectangle height range.
    pub rect_height_range: (usize, usize),
    pub seed: u64,
}

impl Default for ShapesConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            square_side: 10,
            circle_radius: 10,
            rect_width_range: (8, 24),
            rect_height_range: (6, 16),
            seed: 0,
        }
    }
}

impl ShapesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.image_size > u16::MAX as usize {
            return Err(config_err!("image_size {} out of range", self.image_size));
        }
        if self.square_side == 0 || self.square_side >= self.image_size {
            return Err(config_err!(
                "square_side {} must be in 1..{}",
                self.square_side,
                self.image_size
            ));
        }
        for (name, (lo, hi)) in [
            ("rect_width_range", self.rect_width_range),
            ("rect_height_range", self.rect_height_range),
        ] {
            if lo == 0 || lo > hi || hi > self.image_size {
                return Err(config_err!(
                    "{} [{}, {}] must be non-empty, positive and at most {}",
                    name,
                    lo,
                    hi,
                    self.image_size
                ));
            }
        }
        Ok(())
    }

    /// Square positions per axis: top-left coordinates `0..image_size -
    /// square_side`, i.e. 54 at the 64 px / 10 px defaults.
    pub fn positions_per_axis(&self) -> usize {
        self.image_size - self.square_side
    }

    pub fn item_count(&self) -> usize {
        let s = self.positions_per_axis();
        s * s
    }
}

/// Placement of the three shapes in one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneSpec {
    /// Top-left corner `(x, y)`.
    pub square_pos: (usize, usize),
    pub circle_center: (usize, usize),
    /// Top-left corner `(x, y)`.
    pub rect_pos: (usize, usize),
    /// `(width, height)`.
    pub rect_dims: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapesDataset {
    pub config: ShapesConfig,
    pub items: Vec<(SceneSpec, LabelMap)>,
    pub palette: Palette,
}

impl ShapesDataset {
    pub fn maps(&self) -> impl Iterator<Item = &LabelMap> {
        self.items.iter().map(|(_, m)| m)
    }
}

pub fn shapes_palette() -> Palette {
    Palette::from_colors([
        ("background", [0, 0, 0]),
        ("circle", [0, 0, 255]),
        ("rectangle", [0, 255, 0]),
        ("square", [255, 0, 0]),
    ])
    .expect("fixed palette is valid")
}

fn fill_rect(m: &mut LabelMap, x0: usize, y0: usize, w: usize, h: usize, label: u8) {
    let x1 = (x0 + w).min(m.width());
    let y1 = (y0 + h).min(m.height());
    for y in y0.min(y1)..y1 {
        for x in x0.min(x1)..x1 {
            m.set(x, y, label);
        }
    }
}

/// Paints rectangle, square, then circle over a background map. Shapes
/// crossing the border are clipped.
pub fn render_scene(spec: &SceneSpec, cfg: &ShapesConfig) -> Result<LabelMap> {
    let n = cfg.image_size;
    let (sx, sy) = spec.square_pos;
    if sx + cfg.square_side > n || sy + cfg.square_side > n {
        return Err(Error::InvalidSpec(alloc::format!(
            "square at ({}, {}) with side {} does not fit a {}x{} image",
            sx,
            sy,
            cfg.square_side,
            n,
            n
        )));
    }
    let mut m = LabelMap::filled(n, n, BACKGROUND);
    let (rx, ry) = spec.rect_pos;
    let (rw, rh) = spec.rect_dims;
    fill_rect(&mut m, rx, ry, rw, rh, RECTANGLE);
    fill_rect(&mut m, sx, sy, cfg.square_side, cfg.square_side, SQUARE);

    let (cx, cy) = (spec.circle_center.0 as i64, spec.circle_center.1 as i64);
    let r = cfg.circle_radius as i64;
    let r2 = r * r;
    let lo_y = (cy - r).max(0);
    let hi_y = (cy + r).min(n as i64 - 1);
    let lo_x = (cx - r).max(0);
    let hi_x = (cx + r).min(n as i64 - 1);
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            if (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r2 {
                m.set(x as usize, y as usize, CIRCLE);
            }
        }
    }
    Ok(m)
}

/// Draws the random part of item `index` and renders it.
pub fn generate_item(cfg: &ShapesConfig, index: usize) -> Result<(SceneSpec, LabelMap)> {
    let s = cfg.positions_per_axis();
    let n = cfg.image_size;
    let mut rng = rng::stream(cfg.seed, Domain::ShapesItem, index as u64);
    let square_pos = (index % s, index / s);
    let circle_center = (rng.random_range(0..n), rng.random_range(0..n));
    for _ in 0..MAX_RECT_ATTEMPTS {
        let rect_dims = (
            rng.random_range(cfg.rect_width_range.0..=cfg.rect_width_range.1),
            rng.random_range(cfg.rect_height_range.0..=cfg.rect_height_range.1),
        );
        let rect_pos = (rng.random_range(0..n), rng.random_range(0..n));
        let spec = SceneSpec {
            square_pos,
            circle_center,
            rect_pos,
            rect_dims,
        };
        let map = render_scene(&spec, cfg)?;
        // Redraw rectangles that end up fully occluded.
        if map.labels().contains(&RECTANGLE) {
            return Ok((spec, map));
        }
    }
    Err(config_err!(
        "item {}: no visible rectangle after {} placements",
        index,
        MAX_RECT_ATTEMPTS
    ))
}

/// Item `i` has its square at `(i mod S, i div S)` with `S = image_size -
/// square_side` positions per axis. Output is a pure function of `cfg`.
pub fn generate_dataset(cfg: &ShapesConfig) -> Result<ShapesDataset> {
    cfg.validate()?;
    let items = (0..cfg.item_count())
        .map(|i| generate_item(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapesDataset {
        config: *cfg,
        items,
        palette: shapes_palette(),
    })
}
