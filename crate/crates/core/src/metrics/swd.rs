//! Patch descriptors over pyramid levels and the sliced Wasserstein
//! distance between descriptor sets.

use alloc::vec;
use alloc::vec::Vec;

use super::pyramid::PyramidLevel;
use crate::error::{config_err, shape_err, Result};
use crate::gan::scalar::{gemm, MatRef};
use crate::rng::{self, Domain, Rng};

pub const PATCH_SIZE: usize = 7;
pub const DESCRIPTOR_LEN: usize = PATCH_SIZE * PATCH_SIZE * 3;
/// Added to the standard deviation during normalization.
pub const NORM_EPS: f64 = 1e-8;
/// Projections evaluated per matrix product.
const PROJECTION_BLOCK: usize = 32;

/// `count` descriptors of length `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub resolution: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(resolution: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(shape_err!("descriptor buffer of {} values is not a multiple of dim {}", data.len(), dim));
        }
        Ok(Self { resolution, dim, data })
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Standardizes each of `channels` interleaved channels over the whole
    /// set (every descriptor and every patch position).
    pub fn normalize(&mut self, channels: usize) {
        let count = (self.data.len() / channels).max(1) as f64;
        for c in 0..channels {
            let vals = || self.data.iter().skip(c).step_by(channels);
            let mean = vals().sum::<f64>() / count;
            let var = vals().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            let scale = 1.0 / (libm::sqrt(var) + NORM_EPS);
            for v in self.data.iter_mut().skip(c).step_by(channels) {
                *v = (*v - mean) * scale;
            }
        }
    }
}

/// Per-level descriptor sets plus the resolutions skipped for being smaller
/// than a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptors {
    pub sets: Vec<DescriptorSet>,
    pub skipped: Vec<usize>,
}

/// Samples `patches_per_image` uniform 7x7x3 patches from every level of
/// every image, then normalizes each level's set per color channel.
/// `pyramids[i]` holds the levels of image `i`, finest first.
pub fn extract_descriptors(pyramids: &[Vec<PyramidLevel>], patches_per_image: usize, seed: u64) -> Result<Descriptors> {
    let first = pyramids.first().ok_or_else(|| config_err!("no images to describe"))?;
    if patches_per_image == 0 {
        return Err(config_err!("patches_per_image must be positive"));
    }
    let resolutions: Vec<usize> = first.iter().map(|l| l.resolution).collect();
    for (i, p) in pyramids.iter().enumerate() {
        if p.iter().map(|l| l.resolution).ne(resolutions.iter().copied()) {
            return Err(shape_err!("image {} has a different pyramid layout", i));
        }
    }
    let mut out = Descriptors {
        sets: Vec::new(),
        skipped: Vec::new(),
    };
    for (li, &res) in resolutions.iter().enumerate() {
        if res < PATCH_SIZE {
            out.skipped.push(res);
            continue;
        }
        let mut data = Vec::with_capacity(pyramids.len() * patches_per_image * DESCRIPTOR_LEN);
        for (i, p) in pyramids.iter().enumerate() {
            let level = &p[li].values;
            let mut r = rng::stream(seed, Domain::Patches, ((i as u64) << 8) | li as u64);
            for _ in 0..patches_per_image {
                let x0 = r.random_range(0..=res - PATCH_SIZE);
                let y0 = r.random_range(0..=res - PATCH_SIZE);
                for y in y0..y0 + PATCH_SIZE {
                    let row = (y * res + x0) * 3;
                    data.extend_from_slice(&level[row..row + PATCH_SIZE * 3]);
                }
            }
        }
        let mut set = DescriptorSet::new(res, DESCRIPTOR_LEN, data)?;
        set.normalize(3);
        out.sets.push(set);
    }
    Ok(out)
}

/// Unit direction `j` of the projection family keyed by `seed`.
pub fn projection_direction(seed: u64, j: usize, dim: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, Domain::Projections, j as u64);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform subsample of `target` descriptors without replacement, in
/// original order.
fn subsample(set: &DescriptorSet, target: usize, seed: u64) -> DescriptorSet {
    let mut r = rng::stream(seed, Domain::Subsample, 0);
    let mut idx = rand::seq::index::sample(&mut r, set.count(), target).into_vec();
    idx.sort_unstable();
    let mut data = Vec::with_capacity(target * set.dim);
    for i in idx {
        data.extend_from_slice(set.descriptor(i));
    }
    DescriptorSet {
        data,
        ..*set
    }
}

/// `rows x dim` descriptors projected on `dirs` (`k x dim`), as `k` rows.
fn project(set: &DescriptorSet, dirs: &[f64], k: usize) -> Vec<f64> {
    let n = set.count();
    let mut out = vec![0.0; k * n];
    gemm(
        MatRef::new(dirs, k, set.dim),
        MatRef::new(&set.data, n, set.dim).t(),
        0.0,
        &mut out,
    );
    out
}

/// Mean over `n_projections` random unit directions of the 1-D
/// Wasserstein-1 distance between the projected sets. The larger set is
/// subsampled to the size of the smaller.
pub fn sliced_wasserstein(a: &DescriptorSet, b: &DescriptorSet, n_projections: usize, seed: u64) -> Result<f64> {
    if a.count() == 0 || b.count() == 0 {
        return Err(config_err!("sliced Wasserstein distance needs non-empty sets"));
    }
    if n_projections == 0 {
        return Err(config_err!("n_projections must be positive"));
    }
    if a.dim != b.dim {
        return Err(shape_err!("descriptor dims differ: {} vs {}", a.dim, b.dim));
    }
    let (a_sub, b_sub);
    let (a, b) = match a.count().cmp(&b.count()) {
        core::cmp::Ordering::Greater => {
            a_sub = subsample(a, b.count(), seed);
            (&a_sub, b)
        }
        core::cmp::Ordering::Less => {
            b_sub = subsample(b, a.count(), seed);
            (a, &b_sub)
        }
        core::cmp::Ordering::Equal => (a, b),
    };
    let n = a.count();
    let mut total = 0.0;
    for j0 in (0..n_projections).step_by(PROJECTION_BLOCK) {
        let k = PROJECTION_BLOCK.min(n_projections - j0);
        let mut dirs = Vec::with_capacity(k * a.dim);
        for j in j0..j0 + k {
            dirs.extend(projection_direction(seed, j, a.dim));
        }
        let mut pa = project(a, &dirs, k);
        let mut pb = project(b, &dirs, k);
        for (ra, rb) in pa.chunks_exact_mut(n).zip(pb.chunks_exact_mut(n)) {
            ra.sort_unstable_by(f64::total_cmp);
            rb.sort_unstable_by(f64::total_cmp);
            total += ra.iter().zip(rb.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        }
    }
    Ok(total / n_projections as f64)
}
