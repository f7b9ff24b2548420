//! Model state, the adversarial training step and the Adam optimizer.

use alloc::vec::Vec;

use super::loss;
use super::model::{self, DiscUpstream, ModelConfig, Mode, ParamSet};
use super::ops::Tensor;
use super::scalar::Scalar;
use crate::codec::{one_hot_encode, to_rgb, LabelMap, Palette};
use crate::error::{config_err, shape_err, Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Shared by generator and discriminator.
    pub lr: f64,
    pub batch_size: usize,
    pub total_steps: u64,
    pub adam: AdamConfig,
    /// Discriminator stage whose activations feed feature matching.
    pub feature_layer: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Appendix defaults with the feature layer chosen for `model`.
    pub fn for_model(model: &ModelConfig) -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            total_steps: 50_000,
            adam: AdamConfig::default(),
            feature_layer: default_feature_layer(model),
            seed: 0,
        }
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(config_err!("lr must be a finite non-negative number, got {}", self.lr));
        }
        if self.batch_size < 2 {
            return Err(config_err!("batch_size must be at least 2"));
        }
        if self.feature_layer >= model.discriminator_depth() {
            return Err(config_err!(
                "feature_layer {} must be below discriminator depth {}",
                self.feature_layer,
                model.discriminator_depth()
            ));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps <= 0.0 {
            return Err(config_err!("invalid Adam hyperparameters {:?}", a));
        }
        Ok(())
    }
}

/// Penultimate discriminator conv stage (the only one when depth is 1).
pub fn default_feature_layer(model: &ModelConfig) -> usize {
    model.depth.saturating_sub(2)
}

/// First and second Adam moments, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamMoments<T> {
    pub fn zeros_for(params: &ParamSet<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn shapes_match(&self, params: &ParamSet<T>) -> bool {
        let ok = |bufs: &[Vec<T>]| {
            bufs.len() == params.params.len() && bufs.iter().zip(&params.params).all(|(b, p)| b.len() == p.len())
        };
        ok(&self.m) && ok(&self.v)
    }
}

/// Applies one Adam update with bias correction for step `t` (1-based).
pub fn adam_update<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &[Vec<T>],
    moments: &mut AdamMoments<T>,
    cfg: &AdamConfig,
    lr: f64,
    t: u64,
) {
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let c1 = T::from_f64(1.0 / (1.0 - libm::pow(cfg.beta1, t as f64)));
    let c2 = T::from_f64(1.0 / (1.0 - libm::pow(cfg.beta2, t as f64)));
    let lr = T::from_f64(lr);
    let eps = T::from_f64(cfg.eps);
    for (i, p) in params.params.iter_mut().enumerate() {
        let (m, v, g) = (&mut moments.m[i], &mut moments.v[i], &grads[i]);
        for j in 0..p.data.len() {
            m[j] = b1 * m[j] + (one - b1) * g[j];
            v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
            let mhat = m[j] * c1;
            let vhat = v[j] * c2;
            p.data[j] = p.data[j] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Both networks, their optimizer moments and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub config: ModelConfig,
    pub generator: ParamSet<T>,
    pub discriminator: ParamSet<T>,
    pub gen_moments: AdamMoments<T>,
    pub disc_moments: AdamMoments<T>,
    pub step: u64,
}

impl<T: Scalar> ModelState<T> {
    /// Checks parameter shapes against the config and moment shapes
    /// against the parameters.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let check = |set: &ParamSet<T>, expected: Vec<(alloc::string::String, Vec<usize>)>| -> Result<()> {
            if set.params.len() != expected.len() {
                return Err(shape_err!(
                    "expected {} parameter tensors, found {}",
                    expected.len(),
                    set.params.len()
                ));
            }
            for (p, (name, shape)) in set.params.iter().zip(expected) {
                if p.name != name || p.shape != shape || p.data.len() != shape.iter().product::<usize>() {
                    return Err(shape_err!(
                        "parameter {} {:?} does not match expected {} {:?}",
                        p.name,
                        p.shape,
                        name,
                        shape
                    ));
                }
            }
            Ok(())
        };
        check(&self.generator, model::generator_shapes(&self.config))?;
        check(&self.discriminator, model::discriminator_shapes(&self.config))?;
        if !self.gen_moments.shapes_match(&self.generator) || !self.disc_moments.shapes_match(&self.discriminator) {
            return Err(shape_err!("optimizer moments do not match parameter shapes"));
        }
        Ok(())
    }
}

/// Deterministic initialization from `seed`.
pub fn build_models<T: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<ModelState<T>> {
    cfg.validate()?;
    let generator = model::init_generator(cfg, seed);
    let discriminator = model::init_discriminator(cfg, seed);
    Ok(ModelState {
        config: *cfg,
        gen_moments: AdamMoments::zeros_for(&generator),
        disc_moments: AdamMoments::zeros_for(&discriminator),
        generator,
        discriminator,
        step: 0,
    })
}

/// Latent vectors, `n x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    pub n: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl LatentBatch {
    pub fn new(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * dim {
            return Err(shape_err!("latent buffer has {} values, expected {}", values.len(), n * dim));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config_err!("latent values must be finite"));
        }
        Ok(Self { n, dim, values })
    }

    fn cast<T: Scalar>(&self) -> Vec<T> {
        self.values.iter().map(|&v| T::from_f64(v)).collect()
    }
}

/// I.i.d. standard normal latents drawn from `rng`.
pub fn sample_latent<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> LatentBatch {
    let values = (0..n * dim).map(|_| rng::normal(rng)).collect();
    LatentBatch { n, dim, values }
}

fn check_latent(cfg: &ModelConfig, z: &LatentBatch) -> Result<()> {
    if z.dim != cfg.latent_dim {
        return Err(shape_err!("latent dim {} does not match model latent_dim {}", z.dim, cfg.latent_dim));
    }
    if z.n == 0 {
        return Err(shape_err!("empty latent batch"));
    }
    Ok(())
}

/// Generator output `n x W x W x C`: class probabilities (semantic) or
/// colors in `[0,1]` (rgb). Batch-norm uses the statistics of `z`'s batch.
pub fn generator_forward<T: Scalar>(state: &ModelState<T>, z: &LatentBatch) -> Result<Tensor<T>> {
    check_latent(&state.config, z)?;
    Ok(model::generator_forward_cached(&state.config, &state.generator, &z.cast(), z.n).out)
}

/// Discriminator probabilities and the activations of `feature_layer`.
pub fn discriminator_forward<T: Scalar>(
    state: &ModelState<T>,
    x: &Tensor<T>,
    feature_layer: usize,
) -> Result<(Vec<f64>, Tensor<T>)> {
    model::check_input(&state.config, x)?;
    if feature_layer >= state.config.discriminator_depth() {
        return Err(config_err!("feature_layer {} out of range", feature_layer));
    }
    let cache = model::discriminator_forward_cached(&state.config, &state.discriminator, x);
    let probs = cache.probs.iter().map(|p| p.as_f64()).collect();
    Ok((probs, cache.features(feature_layer).clone()))
}

/// Encodes real label maps as discriminator input: one-hot volumes in
/// semantic mode, palette colors in rgb mode.
pub fn encode_real_batch<T: Scalar>(cfg: &ModelConfig, maps: &[&LabelMap], palette: &Palette) -> Result<Tensor<T>> {
    let w = cfg.image_size;
    let c = cfg.image_channels();
    let mut data = Vec::with_capacity(maps.len() * w * w * c);
    for m in maps {
        if m.width() != w || m.height() != w {
            return Err(shape_err!(
                "label map is {}x{}, model expects {}x{}",
                m.width(),
                m.height(),
                w,
                w
            ));
        }
        match cfg.mode {
            Mode::Semantic => data.extend(one_hot_encode(m, cfg.classes)?.probs().iter().map(|&v| T::from_f64(v))),
            Mode::Rgb => data.extend(to_rgb(m, palette)?.pixels().iter().map(|&v| T::from_f64(v))),
        }
    }
    Ok(Tensor::from_vec(maps.len(), w, w, c, data))
}

/// Discriminator BCE loss and its gradient over discriminator parameters,
/// for fixed real and fake batches.
pub fn d_loss_and_grads<T: Scalar>(state: &ModelState<T>, real: &Tensor<T>, fake: &Tensor<T>) -> Result<(f64, Vec<Vec<T>>)> {
    let cfg = &state.config;
    model::check_input(cfg, real)?;
    model::check_input(cfg, fake)?;
    let d = &state.discriminator;
    let cr = model::discriminator_forward_cached(cfg, d, real);
    let cf = model::discriminator_forward_cached(cfg, d, fake);
    let pr: Vec<f64> = cr.probs.iter().map(|p| p.as_f64()).collect();
    let pf: Vec<f64> = cf.probs.iter().map(|p| p.as_f64()).collect();
    let value = loss::d_loss(&pr, &pf);
    let (gr, gf) = loss::d_loss_logit_grads(&pr, &pf);
    let to_t = |v: Vec<f64>| v.into_iter().map(T::from_f64).collect::<Vec<T>>();
    let (gr, gf) = (to_t(gr), to_t(gf));
    let up = |g| DiscUpstream {
        dlogits: Some(g),
        dfeatures: None,
    };
    let (a, _) = model::discriminator_backward(cfg, d, &cr, up(&gr), true, false);
    let (b, _) = model::discriminator_backward(cfg, d, &cf, up(&gf), true, false);
    let mut grads = a.expect("requested");
    for (x, y) in grads.iter_mut().zip(b.expect("requested")) {
        x.iter_mut().zip(y).for_each(|(p, q)| *p = *p + q);
    }
    Ok((value, grads))
}

/// Feature-matching loss of the generator and its gradient over generator
/// parameters. Real features are constants.
pub fn fm_loss_and_grads<T: Scalar>(
    state: &ModelState<T>,
    real: &Tensor<T>,
    z: &LatentBatch,
    feature_layer: usize,
) -> Result<(f64, Vec<Vec<T>>)> {
    check_latent(&state.config, z)?;
    let gcache = model::generator_forward_cached(&state.config, &state.generator, &z.cast(), z.n);
    fm_from_generator_cache(state, real, &gcache, feature_layer)
}

fn fm_from_generator_cache<T: Scalar>(
    state: &ModelState<T>,
    real: &Tensor<T>,
    gcache: &model::GenCache<T>,
    feature_layer: usize,
) -> Result<(f64, Vec<Vec<T>>)> {
    let cfg = &state.config;
    model::check_input(cfg, real)?;
    if feature_layer >= cfg.discriminator_depth() {
        return Err(config_err!("feature_layer {} out of range", feature_layer));
    }
    let d = &state.discriminator;
    let cr = model::discriminator_forward_cached(cfg, d, real);
    let cf = model::discriminator_forward_cached(cfg, d, &gcache.out);
    let fr = cr.features(feature_layer);
    let ff = cf.features(feature_layer);
    let as_f64 = |t: &Tensor<T>| t.data.iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
    let (value, grad) = loss::feature_matching_with_grad(&as_f64(fr), fr.n, &as_f64(ff), ff.n)?;
    let dfeat = Tensor::from_vec(ff.n, ff.h, ff.w, ff.c, grad.into_iter().map(T::from_f64).collect());
    let up = DiscUpstream {
        dlogits: None,
        dfeatures: Some((feature_layer, &dfeat)),
    };
    let (_, dx) = model::discriminator_backward(cfg, d, &cf, up, false, true);
    let dx = dx.expect("requested");
    let grads = model::generator_backward(cfg, &state.generator, gcache, &dx);
    Ok((value, grads))
}

/// Signs of every leaky-ReLU output in the generator (on `z`) and the
/// discriminator (on `real` and on the generated batch). Two parameter
/// settings with equal patterns lie in the same linear region of every
/// activation, which finite-difference checks rely on.
pub fn activation_pattern<T: Scalar>(state: &ModelState<T>, real: &Tensor<T>, z: &LatentBatch) -> Result<Vec<bool>> {
    check_latent(&state.config, z)?;
    model::check_input(&state.config, real)?;
    let cfg = &state.config;
    let g = model::generator_forward_cached(cfg, &state.generator, &z.cast(), z.n);
    let mut bits = Vec::new();
    for t in g.activations() {
        bits.extend(t.data.iter().map(|v| *v < T::zero()));
    }
    for x in [real, &g.out] {
        let d = model::discriminator_forward_cached(cfg, &state.discriminator, x);
        for layer in 0..cfg.depth {
            bits.extend(d.features(layer).data.iter().map(|v| *v < T::zero()));
        }
    }
    Ok(bits)
}

/// Losses reported by one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

fn grads_finite<T: Scalar>(g: &[Vec<T>]) -> bool {
    g.iter().all(|t| t.iter().all(|v| v.is_finite()))
}

/// One discriminator Adam update on the BCE loss (generator frozen), then
/// one generator Adam update on the feature-matching loss (discriminator
/// frozen, real features constant). Increments `state.step`.
pub fn train_step<T: Scalar>(
    state: &mut ModelState<T>,
    real: &Tensor<T>,
    z: &LatentBatch,
    tc: &TrainConfig,
) -> Result<StepLosses> {
    let cfg = state.config;
    tc.validate(&cfg)?;
    if real.n != tc.batch_size || z.n != tc.batch_size {
        return Err(shape_err!(
            "batch sizes (real {}, latent {}) must equal batch_size {}",
            real.n,
            z.n,
            tc.batch_size
        ));
    }
    check_latent(&cfg, z)?;
    let step = state.step + 1;
    let diverged = |detail: &str| Error::Diverged {
        step,
        detail: detail.into(),
    };

    // The generator is frozen during the discriminator update, so its
    // forward pass is shared by both halves of the step.
    let gcache = model::generator_forward_cached(&cfg, &state.generator, &z.cast(), z.n);
    let (d_value, d_grads) = d_loss_and_grads(state, real, &gcache.out)?;
    if !d_value.is_finite() || !grads_finite(&d_grads) {
        return Err(diverged("non-finite discriminator loss or gradient"));
    }
    adam_update(
        &mut state.discriminator,
        &d_grads,
        &mut state.disc_moments,
        &tc.adam,
        tc.lr,
        step,
    );

    let (g_value, g_grads) = fm_from_generator_cache(state, real, &gcache, tc.feature_layer)?;
    if !g_value.is_finite() || !grads_finite(&g_grads) {
        return Err(diverged("non-finite feature-matching loss or gradient"));
    }
    adam_update(&mut state.generator, &g_grads, &mut state.gen_moments, &tc.adam, tc.lr, step);
    state.step = step;
    Ok(StepLosses {
        d_loss: d_value,
        g_loss: g_value,
    })
}
