use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn mean_neg_log(ps: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in ps {
        sum -= libm::log(clamp_prob(p));
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Binary cross-entropy of the discriminator:
/// `-mean(log d_real) - mean(log(1 - d_fake))`.
pub fn d_loss(d_real: &[f64], d_fake: &[f64]) -> f64 {
    mean_neg_log(d_real.iter().copied()) + mean_neg_log(d_fake.iter().map(|p| 1.0 - p))
}

/// Gradients of [`d_loss`] with respect to the pre-sigmoid logits. Entries
/// whose probability is clamped get zero gradient.
pub(crate) fn d_loss_logit_grads(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nr = d_real.len().max(1) as f64;
    let nf = d_fake.len().max(1) as f64;
    let inside = |p: f64| p > PROB_CLAMP && p < 1.0 - PROB_CLAMP;
    // d/dz[-log s(z)] = s - 1, d/dz[-log(1 - s(z))] = s
    let real = d_real
        .iter()
        .map(|&p| if inside(p) { (p - 1.0) / nr } else { 0.0 })
        .collect();
    let fake = d_fake
        .iter()
        .map(|&p| if inside(1.0 - p) { p / nf } else { 0.0 })
        .collect();
    (real, fake)
}

fn batch_mean(f: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for row in f.chunks_exact(dim) {
        for (a, &b) in m.iter_mut().zip(row) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    m
}

/// Squared L2 distance between batch-mean features. `f_real` and `f_fake`
/// are row-major `n x dim` matrices; batch sizes may differ.
pub fn feature_matching_loss(f_real: &[f64], n_real: usize, f_fake: &[f64], n_fake: usize) -> Result<f64> {
    Ok(feature_matching_with_grad(f_real, n_real, f_fake, n_fake)?.0)
}

/// Loss plus its gradient with respect to `f_fake`.
pub(crate) fn feature_matching_with_grad(
    f_real: &[f64],
    n_real: usize,
    f_fake: &[f64],
    n_fake: usize,
) -> Result<(f64, Vec<f64>)> {
    if n_real == 0 || n_fake == 0 || !f_real.len().is_multiple_of(n_real) || !f_fake.len().is_multiple_of(n_fake) {
        return Err(shape_err!("feature batches must be non-empty n x dim matrices"));
    }
    let dim = f_real.len() / n_real;
    if f_fake.len() / n_fake != dim {
        return Err(shape_err!(
            "feature dims differ: real {} vs fake {}",
            dim,
            f_fake.len() / n_fake
        ));
    }
    let mr = batch_mean(f_real, n_real, dim);
    let mf = batch_mean(f_fake, n_fake, dim);
    let diff: Vec<f64> = mf.iter().zip(&mr).map(|(a, b)| a - b).collect();
    let loss = diff.iter().map(|d| d * d).sum();
    let scale = 2.0 / n_fake as f64;
    let mut grad = Vec::with_capacity(f_fake.len());
    for _ in 0..n_fake {
        grad.extend(diff.iter().map(|d| scale * d));
    }
    Ok((loss, grad))
}
