//! Central finite-difference checks of the analytic training gradients.

use alloc::vec::Vec;

use super::ops::Tensor;
use super::train::{activation_pattern, d_loss_and_grads, fm_loss_and_grads, generator_forward, LatentBatch, ModelState};
use crate::error::Result;
use crate::rng::{self, Domain, Rng};

/// Perturbation used for the central differences.
pub const STEP: f64 = 1e-4;

/// Outcome of one check: the worst relative error over `checked`
/// parameters, and how many draws were skipped at activation kinks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Relative error with an absolute floor of 1e-6 so exactly-zero gradients
/// do not divide by zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[derive(Clone, Copy)]
enum Net {
    Generator,
    Discriminator,
}

fn params_mut(s: &mut ModelState<f64>, net: Net) -> &mut super::ParamSet<f64> {
    match net {
        Net::Generator => &mut s.generator,
        Net::Discriminator => &mut s.discriminator,
    }
}

/// Central differences are only a valid oracle while `theta +- STEP` stays
/// inside one linear region of every leaky ReLU, so draws that flip an
/// activation sign are skipped and replaced. Parameters are drawn one per
/// tensor first, then uniformly; gives up after `4 * count` draws.
#[allow(clippy::too_many_arguments)]
fn check<F>(
    state: &ModelState<f64>,
    real: &Tensor<f64>,
    z: &LatentBatch,
    net: Net,
    count: usize,
    seed: u64,
    grads: &[Vec<f64>],
    loss: F,
) -> Result<GradCheck>
where
    F: Fn(&ModelState<f64>) -> Result<f64>,
{
    let mut s = state.clone();
    let sizes: Vec<usize> = params_mut(&mut s, net).params.iter().map(|p| p.len()).collect();
    let base = activation_pattern(state, real, z)?;
    let mut r = rng::stream(seed, Domain::Eval, 1);
    let mut out = GradCheck {
        worst: 0.0,
        checked: 0,
        skipped: 0,
    };
    for k in 0..4 * count {
        if out.checked == count {
            break;
        }
        let t = if k < sizes.len() { k } else { r.random_range(0..sizes.len()) };
        let i = r.random_range(0..sizes[t]);
        let orig = params_mut(&mut s, net).params[t].data[i];
        params_mut(&mut s, net).params[t].data[i] = orig + STEP;
        let plus = loss(&s)?;
        let kink = activation_pattern(&s, real, z)? != base;
        params_mut(&mut s, net).params[t].data[i] = orig - STEP;
        let minus = loss(&s)?;
        let kink = kink || activation_pattern(&s, real, z)? != base;
        params_mut(&mut s, net).params[t].data[i] = orig;
        if kink {
            out.skipped += 1;
            continue;
        }
        out.worst = out.worst.max(rel_err(grads[t][i], (plus - minus) / (2.0 * STEP)));
        out.checked += 1;
    }
    Ok(out)
}

/// Discriminator gradients of the BCE loss against a fixed generated batch.
pub fn check_discriminator(state: &ModelState<f64>, real: &Tensor<f64>, z: &LatentBatch, count: usize, seed: u64) -> Result<GradCheck> {
    let fake = generator_forward(state, z)?;
    let (_, grads) = d_loss_and_grads(state, real, &fake)?;
    check(state, real, z, Net::Discriminator, count, seed, &grads, |s| {
        Ok(d_loss_and_grads(s, real, &fake)?.0)
    })
}

/// Generator gradients of the feature-matching loss at discriminator stage
/// `layer`.
pub fn check_generator(
    state: &ModelState<f64>,
    real: &Tensor<f64>,
    z: &LatentBatch,
    layer: usize,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    let (_, grads) = fm_loss_and_grads(state, real, z, layer)?;
    check(state, real, z, Net::Generator, count, seed, &grads, |s| {
        Ok(fm_loss_and_grads(s, real, z, layer)?.0)
    })
}
