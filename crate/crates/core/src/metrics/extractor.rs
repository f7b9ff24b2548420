//! Fixed random-weight convolutional feature extractor for Fréchet
//! distances when no pretrained network is available.

use alloc::vec::Vec;

use crate::codec::RgbImage;
use crate::error::{config_err, Result};
use crate::gan::ops::{self, ConvGeom, Tensor};
use crate::rng::{self, Domain};

pub const EXTRACTOR_SEED: u64 = 42;
pub const FEATURE_DIM: usize = 64;
const WIDTHS: [usize; 4] = [3, 16, 32, FEATURE_DIM];
const KERNEL: usize = 3;

/// Three stride-2 conv + leaky ReLU stages with He-normal weights drawn
/// from a fixed seed, followed by global average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomConvExtractor {
    stages: Vec<(ConvGeom, Vec<f64>)>,
}

impl RandomConvExtractor {
    pub fn new(seed: u64) -> Self {
        let stages = (0..WIDTHS.len() - 1)
            .map(|s| {
                let g = ConvGeom {
                    ks: KERNEL,
                    stride: 2,
                    cin: WIDTHS[s],
                    cout: WIDTHS[s + 1],
                };
                let std = libm::sqrt(2.0 / g.patch_len() as f64);
                let mut r = rng::stream(seed, Domain::Extractor, s as u64);
                let w = (0..g.weight_len()).map(|_| std * rng::normal(&mut r)).collect();
                (g, w)
            })
            .collect();
        Self { stages }
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    /// Features of every image, row-major `images.len() x dim`.
    pub fn extract(&self, images: &[RgbImage]) -> Result<Vec<f64>> {
        let first = images.first().ok_or_else(|| config_err!("no images to extract features from"))?;
        let (w, h) = (first.width(), first.height());
        if images.iter().any(|i| i.width() != w || i.height() != h) {
            return Err(config_err!("feature extraction needs equally sized images"));
        }
        let mut out = Vec::with_capacity(images.len() * FEATURE_DIM);
        // Batches bound the im2col buffers without changing results.
        for chunk in images.chunks(64) {
            let data = chunk.iter().flat_map(|i| i.pixels().iter().copied()).collect();
            let mut x = Tensor::from_vec(chunk.len(), h, w, 3, data);
            for (g, weight) in &self.stages {
                x = ops::conv_forward(&x, g, weight, None);
                ops::leaky_relu(&mut x.data);
            }
            let pixels = (x.h * x.w) as f64;
            for b in 0..x.n {
                let mut f = [0.0; FEATURE_DIM];
                for px in x.item(b).chunks_exact(FEATURE_DIM) {
                    for (a, v) in f.iter_mut().zip(px) {
                        *a += v;
                    }
                }
                out.extend(f.iter().map(|v| v / pixels));
            }
        }
        Ok(out)
    }
}

impl Default for RandomConvExtractor {
    fn default() -> Self {
        Self::new(EXTRACTOR_SEED)
    }
}
