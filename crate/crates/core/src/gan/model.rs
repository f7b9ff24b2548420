//! DCGAN-style generator and discriminator shared by both output modes.
//!
//! Generator: dense `ld -> 4*4*C0`, batch-norm, leaky-ReLU, then `depth`
//! stages of nearest 2x upsample, conv, batch-norm, leaky-ReLU, and a final
//! conv head (softmax over `K` classes or sigmoid over 3 channels).
//!
//! Discriminator: `depth` stride-2 conv stages with leaky-ReLU and a dense
//! sigmoid output. Only the generator head and the discriminator's first
//! conv depend on the mode.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ops::{self, BnCache, ConvGeom, Tensor};
use super::scalar::Scalar;
use crate::error::{config_err, shape_err, Result};
use crate::rng::{self, Domain};

/// Output representation of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Per-pixel softmax over `K` labels.
    Semantic,
    /// Three sigmoid color channels.
    Rgb,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Semantic => "semantic",
            Mode::Rgb => "rgb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "semantic" => Some(Mode::Semantic),
            "rgb" => Some(Mode::Rgb),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub mode: Mode,
    pub image_size: usize,
    pub classes: usize,
    pub latent_dim: usize,
    pub kernel_size: usize,
    pub base_channels: usize,
    pub depth: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 8 {
            return Err(config_err!("depth {} must be in 1..=8", self.depth));
        }
        if self.image_size != 4 << self.depth {
            return Err(config_err!(
                "image_size {} must equal 4 * 2^depth = {}",
                self.image_size,
                4usize << self.depth
            ));
        }
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(config_err!("kernel_size {} must be odd and >= 3", self.kernel_size));
        }
        if self.latent_dim == 0 {
            return Err(config_err!("latent_dim must be at least 1"));
        }
        if self.base_channels == 0 {
            return Err(config_err!("base_channels must be at least 1"));
        }
        if self.mode == Mode::Semantic && !(2..=crate::codec::MAX_CLASSES).contains(&self.classes) {
            return Err(config_err!("semantic mode needs 2..=256 classes, got {}", self.classes));
        }
        Ok(())
    }

    /// Depth for a given image side, if it is `4 * 2^d`.
    pub fn depth_for(image_size: usize) -> Option<usize> {
        if image_size < 8 || !image_size.is_multiple_of(4) || !(image_size / 4).is_power_of_two() {
            return None;
        }
        Some((image_size / 4).trailing_zeros() as usize)
    }

    /// Channels of the generator's image-space output and the
    /// discriminator's input.
    pub fn image_channels(&self) -> usize {
        match self.mode {
            Mode::Semantic => self.classes,
            Mode::Rgb => 3,
        }
    }

    /// Generator channels after stage `s` (stage 0 is the dense seed).
    fn gen_channels(&self, s: usize) -> usize {
        self.base_channels << (self.depth - s)
    }

    fn disc_channels(&self, s: usize) -> usize {
        self.base_channels << s
    }

    fn gen_conv(&self, s: usize) -> ConvGeom {
        ConvGeom {
            ks: self.kernel_size,
            stride: 1,
            cin: self.gen_channels(s - 1),
            cout: self.gen_channels(s),
        }
    }

    fn gen_head(&self) -> ConvGeom {
        ConvGeom {
            ks: self.kernel_size,
            stride: 1,
            cin: self.base_channels,
            cout: self.image_channels(),
        }
    }

    fn disc_conv(&self, s: usize) -> ConvGeom {
        ConvGeom {
            ks: self.kernel_size,
            stride: 2,
            cin: if s == 0 {
                self.image_channels()
            } else {
                self.disc_channels(s - 1)
            },
            cout: self.disc_channels(s),
        }
    }

    fn disc_flat(&self) -> usize {
        16 * self.disc_channels(self.depth - 1)
    }

    /// Number of discriminator intermediate layers usable for feature
    /// matching.
    pub fn discriminator_depth(&self) -> usize {
        self.depth
    }
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T> Param<T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub params: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn total_len(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    pub fn zeros_like(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

enum Init {
    /// He-normal with the given fan-in.
    He(usize),
    Zeros,
    Ones,
}

struct Builder<T> {
    seed: u64,
    domain: Domain,
    params: Vec<Param<T>>,
}

impl<T: Scalar> Builder<T> {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) {
        let len: usize = shape.iter().product();
        // One stream per tensor position keeps shared tensors identical
        // across modes.
        let mut r = rng::stream(self.seed, self.domain, self.params.len() as u64);
        let data = match init {
            Init::He(fan_in) => {
                let std = libm::sqrt(2.0 / ((1.0 + ops::LEAKY_SLOPE * ops::LEAKY_SLOPE) * fan_in as f64));
                (0..len).map(|_| T::from_f64(std * rng::normal(&mut r))).collect()
            }
            Init::Zeros => vec![T::zero(); len],
            Init::Ones => vec![T::one(); len],
        };
        self.params.push(Param { name, shape, data });
    }

    fn conv(&mut self, prefix: &str, g: &ConvGeom, bias: bool) {
        self.add(
            format!("{prefix}.w"),
            vec![g.ks, g.ks, g.cin, g.cout],
            Init::He(g.patch_len()),
        );
        if bias {
            self.add(format!("{prefix}.b"), vec![g.cout], Init::Zeros);
        }
    }

    fn bn(&mut self, prefix: &str, c: usize) {
        self.add(format!("{prefix}.gamma"), vec![c], Init::Ones);
        self.add(format!("{prefix}.beta"), vec![c], Init::Zeros);
    }
}

// Parameter indices. The generator stores [dense.w, bn0.gamma, bn0.beta,
// (conv.w, bn.gamma, bn.beta) per stage, head.w, head.b]; the discriminator
// stores [(conv.w, conv.b) per stage, out.w, out.b].
const G_STAGE0: usize = 3;
const G_PER_STAGE: usize = 3;
const D_PER_STAGE: usize = 2;

pub fn init_generator<T: Scalar>(cfg: &ModelConfig, seed: u64) -> ParamSet<T> {
    let mut b = Builder {
        seed,
        domain: Domain::GeneratorInit,
        params: Vec::new(),
    };
    let c0 = cfg.gen_channels(0);
    b.add("g.dense.w".into(), vec![cfg.latent_dim, 16 * c0], Init::He(cfg.latent_dim));
    b.bn("g.bn0", c0);
    for s in 1..=cfg.depth {
        b.conv(&format!("g.stage{s}.conv"), &cfg.gen_conv(s), false);
        b.bn(&format!("g.stage{s}.bn"), cfg.gen_channels(s));
    }
    b.conv("g.head", &cfg.gen_head(), true);
    ParamSet { params: b.params }
}

pub fn init_discriminator<T: Scalar>(cfg: &ModelConfig, seed: u64) -> ParamSet<T> {
    let mut b = Builder {
        seed,
        domain: Domain::DiscriminatorInit,
        params: Vec::new(),
    };
    for s in 0..cfg.depth {
        b.conv(&format!("d.stage{s}.conv"), &cfg.disc_conv(s), true);
    }
    b.add("d.out.w".into(), vec![cfg.disc_flat(), 1], Init::He(cfg.disc_flat()));
    b.add("d.out.b".into(), vec![1], Init::Zeros);
    ParamSet { params: b.params }
}

/// Expected parameter shapes, in storage order.
pub fn generator_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let p: ParamSet<f32> = init_generator(cfg, 0);
    p.params.into_iter().map(|p| (p.name, p.shape)).collect()
}

pub fn discriminator_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let p: ParamSet<f32> = init_discriminator(cfg, 0);
    p.params.into_iter().map(|p| (p.name, p.shape)).collect()
}

pub(crate) struct GenStage<T> {
    /// Upsampled conv input.
    up: Tensor<T>,
    bn: BnCache<T>,
    /// Post-activation output.
    act: Tensor<T>,
}

pub(crate) struct GenCache<T> {
    z: Vec<T>,
    bn0: BnCache<T>,
    act0: Tensor<T>,
    stages: Vec<GenStage<T>>,
    /// Final image-space output (probabilities or colors).
    pub(crate) out: Tensor<T>,
}

impl<T: Scalar> GenCache<T> {
    /// Post-activation outputs of the dense seed and every stage.
    pub(crate) fn activations(&self) -> impl Iterator<Item = &Tensor<T>> {
        core::iter::once(&self.act0).chain(self.stages.iter().map(|s| &s.act))
    }
}

pub(crate) fn generator_forward_cached<T: Scalar>(cfg: &ModelConfig, g: &ParamSet<T>, z: &[T], n: usize) -> GenCache<T> {
    let p = &g.params;
    let c0 = cfg.gen_channels(0);
    let dense = ops::dense_forward(z, n, &p[0].data, 16 * c0, None);
    let dense = Tensor::from_vec(n, 4, 4, c0, dense);
    let (mut act0, bn0) = ops::batch_norm(&dense, &p[1].data, &p[2].data);
    ops::leaky_relu(&mut act0.data);

    let mut stages: Vec<GenStage<T>> = Vec::with_capacity(cfg.depth);
    for s in 1..=cfg.depth {
        let prev = stages.last().map(|st| &st.act).unwrap_or(&act0);
        let up = ops::upsample2(prev);
        let base = G_STAGE0 + (s - 1) * G_PER_STAGE;
        let conv = ops::conv_forward(&up, &cfg.gen_conv(s), &p[base].data, None);
        let (mut act, bn) = ops::batch_norm(&conv, &p[base + 1].data, &p[base + 2].data);
        ops::leaky_relu(&mut act.data);
        stages.push(GenStage { up, bn, act });
    }

    let head = G_STAGE0 + cfg.depth * G_PER_STAGE;
    let last = stages.last().map(|st| &st.act).unwrap_or(&act0);
    let mut out = ops::conv_forward(last, &cfg.gen_head(), &p[head].data, Some(&p[head + 1].data));
    match cfg.mode {
        Mode::Semantic => ops::softmax_channels(&mut out.data, out.c),
        Mode::Rgb => out.data.iter_mut().for_each(|v| *v = ops::sigmoid(*v)),
    }
    GenCache {
        z: z.to_vec(),
        bn0,
        act0,
        stages,
        out,
    }
}

/// Parameter gradients of the generator given `dL/d(output)`.
pub(crate) fn generator_backward<T: Scalar>(
    cfg: &ModelConfig,
    g: &ParamSet<T>,
    cache: &GenCache<T>,
    dout: &Tensor<T>,
) -> Vec<Vec<T>> {
    let p = &g.params;
    let mut grads = g.zeros_like();
    let mut d = dout.clone();
    match cfg.mode {
        Mode::Semantic => ops::softmax_channels_backward(&cache.out.data, &mut d.data, d.c),
        Mode::Rgb => {
            for (dv, &y) in d.data.iter_mut().zip(&cache.out.data) {
                *dv = *dv * y * (T::one() - y);
            }
        }
    }
    let head = G_STAGE0 + cfg.depth * G_PER_STAGE;
    let last = cache.stages.last().map(|st| &st.act).unwrap_or(&cache.act0);
    let hg = ops::conv_backward(last, &cfg.gen_head(), &p[head].data, &d, true, true, true);
    grads[head] = hg.dw.expect("requested");
    grads[head + 1] = hg.db.expect("requested");
    let mut d = hg.dx.expect("requested");

    for s in (1..=cfg.depth).rev() {
        let st = &cache.stages[s - 1];
        let base = G_STAGE0 + (s - 1) * G_PER_STAGE;
        ops::leaky_relu_backward(&st.act.data, &mut d.data);
        let (dconv, dgamma, dbeta) = ops::batch_norm_backward(&st.bn, &p[base + 1].data, &d);
        grads[base + 1] = dgamma;
        grads[base + 2] = dbeta;
        let cg = ops::conv_backward(&st.up, &cfg.gen_conv(s), &p[base].data, &dconv, false, true, true);
        grads[base] = cg.dw.expect("requested");
        d = ops::upsample2_backward(&cg.dx.expect("requested"));
    }

    ops::leaky_relu_backward(&cache.act0.data, &mut d.data);
    let (ddense, dgamma, dbeta) = ops::batch_norm_backward(&cache.bn0, &p[1].data, &d);
    grads[1] = dgamma;
    grads[2] = dbeta;
    let n = d.n;
    let (_, dw, _) = ops::dense_backward(&cache.z, n, &p[0].data, ddense.item_len(), &ddense.data, false);
    grads[0] = dw;
    grads
}

pub(crate) struct DiscCache<T> {
    input: Tensor<T>,
    /// Post-activation outputs of each conv stage.
    acts: Vec<Tensor<T>>,
    pub(crate) probs: Vec<T>,
}

impl<T: Scalar> DiscCache<T> {
    pub(crate) fn features(&self, layer: usize) -> &Tensor<T> {
        &self.acts[layer]
    }
}

pub(crate) fn discriminator_forward_cached<T: Scalar>(cfg: &ModelConfig, d: &ParamSet<T>, x: &Tensor<T>) -> DiscCache<T> {
    let p = &d.params;
    let mut acts: Vec<Tensor<T>> = Vec::with_capacity(cfg.depth);
    for s in 0..cfg.depth {
        let input = acts.last().unwrap_or(x);
        let base = s * D_PER_STAGE;
        let mut a = ops::conv_forward(input, &cfg.disc_conv(s), &p[base].data, Some(&p[base + 1].data));
        ops::leaky_relu(&mut a.data);
        acts.push(a);
    }
    let out = cfg.depth * D_PER_STAGE;
    let last = acts.last().expect("depth >= 1");
    let logits = ops::dense_forward(&last.data, x.n, &p[out].data, 1, Some(&p[out + 1].data));
    DiscCache {
        input: x.clone(),
        acts,
        probs: logits.into_iter().map(ops::sigmoid).collect(),
    }
}

/// Upstream gradients entering the discriminator.
pub(crate) struct DiscUpstream<'a, T> {
    /// `dL/dlogit` per batch item.
    pub dlogits: Option<&'a [T]>,
    /// `dL/d(features)` at `layer`.
    pub dfeatures: Option<(usize, &'a Tensor<T>)>,
}

/// Returns parameter gradients (if `want_params`) and the input gradient
/// (if `want_input`).
pub(crate) fn discriminator_backward<T: Scalar>(
    cfg: &ModelConfig,
    d: &ParamSet<T>,
    cache: &DiscCache<T>,
    up: DiscUpstream<'_, T>,
    want_params: bool,
    want_input: bool,
) -> (Option<Vec<Vec<T>>>, Option<Tensor<T>>) {
    let p = &d.params;
    let n = cache.input.n;
    let mut grads = want_params.then(|| d.zeros_like());
    let out = cfg.depth * D_PER_STAGE;
    let last = cfg.depth - 1;

    // Gradient arriving at the last stage's activations.
    let mut top = last;
    let mut dact: Option<Tensor<T>> = None;
    if let Some(dl) = up.dlogits {
        let a = &cache.acts[last];
        let (dx, dw, db) = ops::dense_backward(&a.data, n, &p[out].data, 1, dl, true);
        if let Some(gr) = grads.as_mut() {
            gr[out] = dw;
            gr[out + 1] = db;
        }
        dact = Some(Tensor::from_vec(n, a.h, a.w, a.c, dx.expect("requested")));
    } else if let Some((layer, _)) = up.dfeatures {
        top = layer;
    }

    for s in (0..=top).rev() {
        if let Some((layer, df)) = up.dfeatures {
            if layer == s {
                match dact.as_mut() {
                    Some(t) => t.data.iter_mut().zip(&df.data).for_each(|(a, &b)| *a = *a + b),
                    None => dact = Some(df.clone()),
                }
            }
        }
        let Some(mut g) = dact.take() else {
            continue;
        };
        ops::leaky_relu_backward(&cache.acts[s].data, &mut g.data);
        let input = if s == 0 { &cache.input } else { &cache.acts[s - 1] };
        let base = s * D_PER_STAGE;
        let need_dx = s > 0 || want_input;
        let cg = ops::conv_backward(input, &cfg.disc_conv(s), &p[base].data, &g, true, want_params, need_dx);
        if let Some(gr) = grads.as_mut() {
            gr[base] = cg.dw.expect("requested");
            gr[base + 1] = cg.db.expect("requested");
        }
        dact = cg.dx;
    }
    (grads, if want_input { dact } else { None })
}

pub(crate) fn check_input<T: Scalar>(cfg: &ModelConfig, x: &Tensor<T>) -> Result<()> {
    let expected = [x.n, cfg.image_size, cfg.image_size, cfg.image_channels()];
    if x.shape() != expected {
        return Err(shape_err!(
            "discriminator expects {:?}, got {:?}",
            expected,
            x.shape()
        ));
    }
    Ok(())
}
