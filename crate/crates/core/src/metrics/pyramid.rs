//! Gaussian and Laplacian pyramids over 3-channel square images.

use alloc::vec;
use alloc::vec::Vec;

use crate::codec::RgbImage;
use crate::error::{shape_err, Result};

const CHANNELS: usize = 3;
const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// One pyramid level: a band-pass image, or the low-pass residual for the
/// coarsest level. `values` is `resolution x resolution x 3`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub resolution: usize,
    pub values: Vec<f64>,
}

/// Mirror index without repeating the edge sample (`-1 -> 1`, `n -> n - 2`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Separable 5-tap binomial blur with reflect padding.
fn blur(img: &[f64], size: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; img.len()];
    for y in 0..size {
        for x in 0..size {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, w) in KERNEL.iter().enumerate() {
                    let xx = reflect(x as isize + k as isize - 2, size);
                    acc += w * img[(y * size + xx) * CHANNELS + c];
                }
                tmp[(y * size + x) * CHANNELS + c] = acc;
            }
        }
    }
    let mut out = vec![0.0; img.len()];
    for y in 0..size {
        for x in 0..size {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, w) in KERNEL.iter().enumerate() {
                    let yy = reflect(y as isize + k as isize - 2, size);
                    acc += w * tmp[(yy * size + x) * CHANNELS + c];
                }
                out[(y * size + x) * CHANNELS + c] = acc;
            }
        }
    }
    out
}

fn downsample(img: &[f64], size: usize) -> Vec<f64> {
    let blurred = blur(img, size);
    let half = size / 2;
    let mut out = Vec::with_capacity(half * half * CHANNELS);
    for y in 0..half {
        for x in 0..half {
            let i = (2 * y * size + 2 * x) * CHANNELS;
            out.extend_from_slice(&blurred[i..i + CHANNELS]);
        }
    }
    out
}

/// Zero insertion to twice the size, then the same blur scaled by 4.
fn upsample(img: &[f64], size: usize) -> Vec<f64> {
    let big = 2 * size;
    let mut z = vec![0.0; big * big * CHANNELS];
    for y in 0..size {
        for x in 0..size {
            let src = (y * size + x) * CHANNELS;
            let dst = (2 * y * big + 2 * x) * CHANNELS;
            z[dst..dst + CHANNELS].copy_from_slice(&img[src..src + CHANNELS]);
        }
    }
    let mut out = blur(&z, big);
    out.iter_mut().for_each(|v| *v *= 4.0);
    out
}

/// Levels from full resolution down to `min_res`, finest first.
pub fn laplacian_pyramid(img: &RgbImage, min_res: usize) -> Result<Vec<PyramidLevel>> {
    let size = img.width();
    if img.height() != size {
        return Err(shape_err!("pyramid needs a square image, got {}x{}", size, img.height()));
    }
    if min_res == 0 || size < min_res || !size.is_multiple_of(min_res) || !(size / min_res).is_power_of_two() {
        return Err(shape_err!(
            "image side {} is not a power-of-two multiple of min_res {}",
            size,
            min_res
        ));
    }
    let mut levels = Vec::new();
    let mut current = img.pixels().to_vec();
    let mut res = size;
    while res > min_res {
        let low = downsample(&current, res);
        let up = upsample(&low, res / 2);
        let band = current.iter().zip(&up).map(|(a, b)| a - b).collect();
        levels.push(PyramidLevel {
            resolution: res,
            values: band,
        });
        current = low;
        res /= 2;
    }
    levels.push(PyramidLevel {
        resolution: res,
        values: current,
    });
    Ok(levels)
}

/// Inverse of [`laplacian_pyramid`]: upsample-and-add from the residual.
pub fn reconstruct(levels: &[PyramidLevel]) -> Result<Vec<f64>> {
    let (last, bands) = levels
        .split_last()
        .ok_or_else(|| shape_err!("empty pyramid"))?;
    let mut img = last.values.clone();
    let mut res = last.resolution;
    for band in bands.iter().rev() {
        if band.resolution != 2 * res {
            return Err(shape_err!(
                "pyramid level {} does not double {}",
                band.resolution,
                res
            ));
        }
        img = upsample(&img, res);
        for (v, b) in img.iter_mut().zip(&band.values) {
            *v += b;
        }
        res = band.resolution;
    }
    Ok(img)
}
