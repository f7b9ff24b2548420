//! Multi-scale structural similarity and the pairwise diversity score.

use alloc::vec;
use alloc::vec::Vec;

use crate::codec::RgbImage;
use crate::error::{config_err, shape_err, Result};
use crate::rng::{self, Domain};

/// Per-scale exponents, finest first.
pub const SCALE_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Scales used for an image whose shorter side is `side`: as many as fit
/// (up to five) while the coarsest level keeps at least a full window.
pub fn scale_count(side: usize) -> usize {
    (1..=SCALE_WEIGHTS.len())
        .rev()
        .find(|&s| side >> (s - 1) >= WINDOW)
        .unwrap_or(0)
}

/// Exponents for `scales` scales, rescaled to keep the five-scale total.
pub fn scale_weights(scales: usize) -> Vec<f64> {
    let total: f64 = SCALE_WEIGHTS.iter().sum();
    let kept: f64 = SCALE_WEIGHTS[..scales].iter().sum();
    SCALE_WEIGHTS[..scales].iter().map(|w| w * total / kept).collect()
}

fn gaussian_window() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let mid = (WINDOW - 1) as f64 / 2.0;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = libm::exp(-d * d / (2.0 * SIGMA * SIGMA));
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            ..*self
        }
    }

    /// Separable Gaussian filter, valid region only.
    fn filter(&self, g: &[f64; WINDOW]) -> Plane {
        let (w, h) = (self.w + 1 - WINDOW, self.h + 1 - WINDOW);
        let mut tmp = vec![0.0; w * self.h];
        for y in 0..self.h {
            for x in 0..w {
                let row = &self.data[y * self.w + x..][..WINDOW];
                tmp[y * w + x] = row.iter().zip(g).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = (0..WINDOW).map(|k| tmp[(y + k) * w + x] * g[k]).sum();
            }
        }
        Plane { w, h, data: out }
    }

    /// 2x2 mean pooling; odd sides are first padded by mirroring the last
    /// row or column.
    fn downsample(&self) -> Plane {
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let at = |x: usize, y: usize| self.data[y.min(self.h - 1) * self.w + x.min(self.w - 1)];
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (x0, y0) = (2 * x, 2 * y);
                data.push((at(x0, y0) + at(x0 + 1, y0) + at(x0, y0 + 1) + at(x0 + 1, y0 + 1)) / 4.0);
            }
        }
        Plane { w, h, data }
    }
}

/// Mean contrast-structure term and mean SSIM at one scale, both clamped
/// at zero.
fn scale_terms(x: &Plane, y: &Plane, g: &[f64; WINDOW]) -> (f64, f64) {
    let mx = x.filter(g);
    let my = y.filter(g);
    let sq = x.map(y, |a, b| a * a + b * b).filter(g);
    let xy = x.map(y, |a, b| a * b).filter(g);
    let mut cs_sum = 0.0;
    let mut ssim_sum = 0.0;
    for i in 0..mx.data.len() {
        let (a, b) = (mx.data[i], my.data[i]);
        let num0 = 2.0 * a * b;
        let den0 = a * a + b * b;
        let lum = (num0 + C1) / (den0 + C1);
        let cs = (2.0 * xy.data[i] - num0 + C2) / (sq.data[i] - den0 + C2);
        cs_sum += cs;
        ssim_sum += lum * cs;
    }
    let n = mx.data.len() as f64;
    ((cs_sum / n).max(0.0), (ssim_sum / n).max(0.0))
}

fn channel_plane(img: &RgbImage, c: usize) -> Plane {
    Plane {
        w: img.width(),
        h: img.height(),
        data: img.pixels().iter().skip(c).step_by(3).copied().collect(),
    }
}

/// MS-SSIM on `[0, 1]` images, computed per color channel and averaged.
pub fn ms_ssim(x: &RgbImage, y: &RgbImage) -> Result<f64> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(shape_err!(
            "MS-SSIM inputs differ in size: {}x{} vs {}x{}",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        ));
    }
    let scales = scale_count(x.width().min(x.height()));
    if scales == 0 {
        return Err(shape_err!("MS-SSIM needs images of at least {} pixels per side", WINDOW));
    }
    let weights = scale_weights(scales);
    let g = gaussian_window();
    let mut total = 0.0;
    for c in 0..3 {
        let (mut px, mut py) = (channel_plane(x, c), channel_plane(y, c));
        let mut value = 1.0;
        for (s, w) in weights.iter().enumerate() {
            let (cs, ssim) = scale_terms(&px, &py, &g);
            if s + 1 == scales {
                value *= libm::pow(ssim, *w);
            } else {
                value *= libm::pow(cs, *w);
                px = px.downsample();
                py = py.downsample();
            }
        }
        total += value;
    }
    Ok(total / 3.0)
}

/// Unordered pair `(i, j)`, `i < j`, at position `k` of the row-major
/// upper-triangle enumeration for `n` items.
fn pair_at(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

/// Mean MS-SSIM over `n_pairs` distinct unordered pairs sampled without
/// replacement (all pairs when fewer exist). Lower means more diverse.
pub fn ms_ssim_diversity(images: &[RgbImage], n_pairs: usize, seed: u64) -> Result<f64> {
    if images.len() < 2 {
        return Err(config_err!("diversity needs at least 2 images, got {}", images.len()));
    }
    if n_pairs == 0 {
        return Err(config_err!("n_pairs must be at least 1"));
    }
    let n = images.len();
    let total = n * (n - 1) / 2;
    let mut picks: Vec<usize> = if n_pairs >= total {
        (0..total).collect()
    } else {
        let mut r = rng::stream(seed, Domain::Pairs, 0);
        rand::seq::index::sample(&mut r, total, n_pairs).into_vec()
    };
    picks.sort_unstable();
    let mut sum = 0.0;
    for &k in &picks {
        let (i, j) = pair_at(k, n);
        sum += ms_ssim(&images[i], &images[j])?;
    }
    Ok(sum / picks.len() as f64)
}
