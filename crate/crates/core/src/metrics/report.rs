//! Metric configuration, the real-data reference and checkpoint evaluation.

use alloc::vec::Vec;

use super::extractor::{RandomConvExtractor, EXTRACTOR_SEED};
use super::frechet::{feature_stats, frechet_distance, FeatureStats};
use super::pyramid::laplacian_pyramid;
use super::ssim::{ms_ssim_diversity, scale_count};
use super::swd::{extract_descriptors, sliced_wasserstein, DescriptorSet};
use crate::codec::{collapse, spurious_pixel_count, to_rgb, ClassProbVolume, Palette, RgbImage};
use crate::error::{config_err, shape_err, Result};
use crate::gan::{generator_forward, sample_latent, Mode, ModelState, Scalar};
use crate::rng::{self, Domain};

/// SWD values are reported multiplied by this factor.
pub const SWD_SCALE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Coarsest pyramid resolution.
    pub min_res: usize,
    pub patches_per_image: usize,
    pub n_projections: usize,
    pub ms_ssim_pairs: usize,
    /// Distance in `[0,1]` RGB units beyond which a pixel is spurious.
    pub spurious_tol: f64,
    /// Generator batch size used when sampling for evaluation; batch-norm
    /// statistics are taken per batch, as in training.
    pub eval_batch: usize,
    pub extractor_seed: u64,
    /// Keys latents, patches, projections and pair sampling.
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            min_res: 16,
            patches_per_image: 64,
            n_projections: 512,
            ms_ssim_pairs: 1000,
            spurious_tol: 0.02,
            eval_batch: 32,
            extractor_seed: EXTRACTOR_SEED,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_res == 0 || self.patches_per_image == 0 || self.n_projections == 0 || self.ms_ssim_pairs == 0 {
            return Err(config_err!("metric sizes must be positive: {:?}", self));
        }
        if self.eval_batch < 2 {
            return Err(config_err!("eval_batch must be at least 2"));
        }
        if !(self.spurious_tol >= 0.0 && self.spurious_tol.is_finite()) {
            return Err(config_err!("spurious_tol must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Per-level descriptors and feature statistics of the real image set,
/// computed once and reused for every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RealReference {
    pub image_size: usize,
    pub count: usize,
    pub descriptors: Vec<DescriptorSet>,
    pub features: FeatureStats,
}

/// Metrics of one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub step: u64,
    /// `(resolution, SWD x 1e3)`, finest first.
    pub swd_per_level: Vec<(usize, f64)>,
    pub swd_avg: f64,
    pub frechet: f64,
    pub ms_ssim_diversity: f64,
    pub spurious_rate: f64,
    /// MS-SSIM scales used at this image size.
    pub ms_ssim_scales: usize,
}

impl MetricReport {
    pub fn swd_at(&self, resolution: usize) -> Option<f64> {
        self.swd_per_level.iter().find(|(r, _)| *r == resolution).map(|(_, v)| *v)
    }
}

/// Real and generated sets share patch coordinates (image `i` of each set
/// is sampled at the same positions), so comparing a set with itself gives
/// exactly zero instead of a patch-resampling noise floor.
fn describe(images: &[RgbImage], cfg: &MetricConfig) -> Result<Vec<DescriptorSet>> {
    let pyramids = images
        .iter()
        .map(|img| laplacian_pyramid(img, cfg.min_res))
        .collect::<Result<Vec<_>>>()?;
    Ok(extract_descriptors(&pyramids, cfg.patches_per_image, cfg.seed)?.sets)
}

fn random_features(images: &[RgbImage], cfg: &MetricConfig) -> Result<FeatureStats> {
    let e = RandomConvExtractor::new(cfg.extractor_seed);
    feature_stats(&e.extract(images)?, e.dim())
}

/// Builds the reference from real images. `external` replaces the random
/// extractor with precomputed `(features, dim)` vectors.
pub fn prepare_reference(images: &[RgbImage], cfg: &MetricConfig, external: Option<(&[f64], usize)>) -> Result<RealReference> {
    cfg.validate()?;
    let first = images.first().ok_or_else(|| config_err!("empty real image set"))?;
    let features = match external {
        Some((f, dim)) => feature_stats(f, dim)?,
        None => random_features(images, cfg)?,
    };
    Ok(RealReference {
        image_size: first.width(),
        count: images.len(),
        descriptors: describe(images, cfg)?,
        features,
    })
}

/// Scores generated images against the reference. `spurious_rate` is
/// measured by the caller, which knows how the images were produced.
pub fn evaluate_images(
    fake: &[RgbImage],
    spurious_rate: f64,
    reference: &RealReference,
    cfg: &MetricConfig,
    step: u64,
    external: Option<(&[f64], usize)>,
) -> Result<MetricReport> {
    cfg.validate()?;
    let first = fake.first().ok_or_else(|| config_err!("empty generated image set"))?;
    if first.width() != reference.image_size {
        return Err(shape_err!(
            "generated images are {} px, reference is {} px",
            first.width(),
            reference.image_size
        ));
    }
    let fake_sets = describe(fake, cfg)?;
    let mut swd_per_level = Vec::with_capacity(fake_sets.len());
    for (r, f) in reference.descriptors.iter().zip(&fake_sets) {
        let v = sliced_wasserstein(r, f, cfg.n_projections, cfg.seed)?;
        swd_per_level.push((r.resolution, v * SWD_SCALE));
    }
    let swd_avg = swd_per_level.iter().map(|(_, v)| v).sum::<f64>() / swd_per_level.len().max(1) as f64;
    let fake_stats = match external {
        Some((f, dim)) => feature_stats(f, dim)?,
        None => random_features(fake, cfg)?,
    };
    Ok(MetricReport {
        step,
        swd_per_level,
        swd_avg,
        frechet: frechet_distance(&reference.features, &fake_stats)?,
        ms_ssim_diversity: ms_ssim_diversity(fake, cfg.ms_ssim_pairs, cfg.seed)?,
        spurious_rate,
        ms_ssim_scales: scale_count(first.width()),
    })
}

/// Generator samples rendered as RGB images, with the number of spurious
/// pixels among them. Semantic outputs are collapsed and painted with the
/// palette; rgb outputs are used as-is and audited against it.
pub fn render_outputs<T: Scalar>(
    state: &ModelState<T>,
    z: &crate::gan::LatentBatch,
    palette: &Palette,
    tol: f64,
) -> Result<(Vec<RgbImage>, usize)> {
    let cfg = &state.config;
    let out = generator_forward(state, z)?;
    let w = cfg.image_size;
    let mut images = Vec::with_capacity(z.n);
    let mut spurious = 0;
    for b in 0..out.n {
        let px: Vec<f64> = out.item(b).iter().map(|v| v.as_f64()).collect();
        let img = match cfg.mode {
            Mode::Semantic => {
                if palette.len() != cfg.classes {
                    return Err(config_err!(
                        "palette has {} classes, model has {}",
                        palette.len(),
                        cfg.classes
                    ));
                }
                to_rgb(&collapse(&ClassProbVolume::new(w, w, cfg.classes, px)?), palette)?
            }
            Mode::Rgb => RgbImage::new(w, w, px)?,
        };
        spurious += spurious_pixel_count(&img, palette, tol);
        images.push(img);
    }
    Ok((images, spurious))
}

/// `count` samples drawn in batches of `batch` from the evaluation stream.
pub fn sample_images<T: Scalar>(
    state: &ModelState<T>,
    count: usize,
    batch: usize,
    palette: &Palette,
    cfg: &MetricConfig,
) -> Result<(Vec<RgbImage>, f64)> {
    let mut images = Vec::with_capacity(count);
    let mut spurious = 0;
    for (k, start) in (0..count).step_by(batch.max(1)).enumerate() {
        let n = batch.min(count - start);
        let z = sample_latent(n, state.config.latent_dim, &mut rng::stream(cfg.seed, Domain::Eval, k as u64));
        let (imgs, s) = render_outputs(state, &z, palette, cfg.spurious_tol)?;
        images.extend(imgs);
        spurious += s;
    }
    let pixels = (count * state.config.image_size * state.config.image_size).max(1);
    Ok((images, spurious as f64 / pixels as f64))
}

/// Generates as many samples as the reference holds and scores them.
pub fn evaluate_checkpoint<T: Scalar>(
    state: &ModelState<T>,
    reference: &RealReference,
    palette: &Palette,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    if state.config.image_size != reference.image_size {
        return Err(shape_err!(
            "model generates {} px images, dataset has {} px",
            state.config.image_size,
            reference.image_size
        ));
    }
    let (images, spurious_rate) = sample_images(state, reference.count, cfg.eval_batch, palette, cfg)?;
    evaluate_images(&images, spurious_rate, reference, cfg, state.step, None)
}
