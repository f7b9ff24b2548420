//! Square sample grids with black separators.

use semgan_core::codec::RgbImage;

use crate::error::{Error, Result};

pub const SEPARATOR: usize = 2;

/// Side of the grid for `n` tiles, if `n` is a positive perfect square.
pub fn grid_side(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (n > 0 && s * s == n).then_some(s)
}

/// Tiles `images` row-major into a `sqrt(n) x sqrt(n)` grid with
/// `SEPARATOR`-pixel black gaps between tiles.
pub fn tile(images: &[RgbImage]) -> Result<RgbImage> {
    let side = grid_side(images.len())
        .ok_or_else(|| Error::Usage(format!("grid size {} is not a perfect square", images.len())))?;
    let (w, h) = (images[0].width(), images[0].height());
    if images.iter().any(|im| (im.width(), im.height()) != (w, h)) {
        return Err(Error::Usage("grid tiles must share one size".into()));
    }
    let gw = side * w + (side - 1) * SEPARATOR;
    let gh = side * h + (side - 1) * SEPARATOR;
    let mut px = vec![0.0; gw * gh * 3];
    for (k, im) in images.iter().enumerate() {
        let (x0, y0) = ((k % side) * (w + SEPARATOR), (k / side) * (h + SEPARATOR));
        for y in 0..h {
            let dst = ((y0 + y) * gw + x0) * 3;
            px[dst..dst + w * 3].copy_from_slice(&im.pixels()[y * w * 3..(y + 1) * w * 3]);
        }
    }
    Ok(RgbImage::new(gw, gh, px)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_tiles_of_64() {
        let imgs: Vec<RgbImage> = (0..16).map(|_| RgbImage::filled(64, 64, [1.0, 1.0, 1.0])).collect();
        let g = tile(&imgs).unwrap();
        assert_eq!((g.width(), g.height()), (4 * 64 + 3 * 2, 4 * 64 + 3 * 2));
        assert_eq!(g.pixel(64, 0), [0.0; 3]);
        assert_eq!(g.pixel(65, 10), [0.0; 3]);
        assert_eq!(g.pixel(66, 10), [1.0; 3]);
        assert_eq!(g.pixel(261, 261), [1.0; 3]);
    }

    #[test]
    fn placement_is_row_major() {
        let imgs: Vec<RgbImage> = (0..4).map(|k| RgbImage::filled(2, 2, [k as f64 / 4.0, 0.0, 0.0])).collect();
        let g = tile(&imgs).unwrap();
        assert_eq!(g.width(), 6);
        assert_eq!(g.pixel(4, 0)[0], 0.25);
        assert_eq!(g.pixel(0, 4)[0], 0.5);
        assert_eq!(g.pixel(5, 5)[0], 0.75);
    }

    #[test]
    fn non_square_counts_are_usage_errors() {
        assert_eq!(grid_side(15), None);
        assert_eq!(grid_side(0), None);
        assert_eq!(grid_side(1), Some(1));
        let imgs: Vec<RgbImage> = (0..15).map(|_| RgbImage::filled(4, 4, [0.0; 3])).collect();
        assert_eq!(tile(&imgs).unwrap_err().exit_code(), 2);
    }
}
