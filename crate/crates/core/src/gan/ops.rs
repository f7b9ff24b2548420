//! Layer primitives with hand-written backward passes. Activations are NHWC.

use alloc::vec;
use alloc::vec::Vec;

use super::scalar::{gemm, MatRef, Scalar};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const BN_EPS: f64 = 1e-5;

/// Batch of feature maps, `n x h x w x c`, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            data: vec![T::zero(); n * h * w * c],
        }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, c: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * h * w * c, "tensor buffer size");
        Self { n, h, w, c, data }
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn item(&self, i: usize) -> &[T] {
        let len = self.item_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            n: self.n,
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Convolution geometry: square kernel, symmetric zero padding of `ks / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub ks: usize,
    pub stride: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvGeom {
    pub fn pad(&self) -> usize {
        self.ks / 2
    }

    pub fn out_size(&self, size: usize) -> usize {
        (size + 2 * self.pad() - self.ks) / self.stride + 1
    }

    /// Length of one im2col row.
    pub fn patch_len(&self) -> usize {
        self.ks * self.ks * self.cin
    }

    pub fn weight_len(&self) -> usize {
        self.patch_len() * self.cout
    }
}

/// Upper bound on im2col rows materialized at once; keeps the patch buffer
/// cache-resident instead of spanning the whole batch.
const CHUNK_ROWS: usize = 2048;

/// Items per chunk for a layer with `rows_per_item` output pixels.
fn chunk_items(rows_per_item: usize) -> usize {
    (CHUNK_ROWS / rows_per_item.max(1)).max(1)
}

/// Patch rows of items `items` written into `col` (fully overwritten).
fn im2col_into<T: Scalar>(x: &Tensor<T>, g: &ConvGeom, items: core::ops::Range<usize>, ho: usize, wo: usize, col: &mut [T]) {
    let plen = g.patch_len();
    let pad = g.pad() as isize;
    for (k, b) in items.enumerate() {
        let item = x.item(b);
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &mut col[((k * ho + oy) * wo + ox) * plen..][..plen];
                // Taps of one kernel row read consecutive input pixels, so
                // each row is one contiguous copy clipped at the borders.
                let ix0 = (ox * g.stride) as isize - pad;
                let kx_lo = (-ix0).clamp(0, g.ks as isize) as usize;
                let kx_hi = (x.w as isize - ix0).clamp(0, g.ks as isize) as usize;
                for ky in 0..g.ks {
                    let iy = (oy * g.stride) as isize + ky as isize - pad;
                    let row_y = &mut row[ky * g.ks * g.cin..][..g.ks * g.cin];
                    if iy < 0 || iy >= x.h as isize || kx_lo >= kx_hi {
                        row_y.fill(T::zero());
                        continue;
                    }
                    row_y[..kx_lo * g.cin].fill(T::zero());
                    row_y[kx_hi * g.cin..].fill(T::zero());
                    let src = (iy as usize * x.w + (ix0 + kx_lo as isize) as usize) * x.c;
                    let len = (kx_hi - kx_lo) * g.cin;
                    row_y[kx_lo * g.cin..kx_hi * g.cin].copy_from_slice(&item[src..src + len]);
                }
            }
        }
    }
}

/// Scatter-adds patch-row gradients of items `items` into `dx`.
fn col2im_add<T: Scalar>(col: &[T], g: &ConvGeom, items: core::ops::Range<usize>, ho: usize, wo: usize, dx: &mut Tensor<T>) {
    let plen = g.patch_len();
    let pad = g.pad() as isize;
    let (h, w) = (dx.h, dx.w);
    let item_len = dx.item_len();
    for (k, b) in items.enumerate() {
        let item = &mut dx.data[b * item_len..(b + 1) * item_len];
        for oy in 0..ho {
            for ox in 0..wo {
                let row = &col[((k * ho + oy) * wo + ox) * plen..][..plen];
                for ky in 0..g.ks {
                    let iy = (oy * g.stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..g.ks {
                        let ix = (ox * g.stride) as isize + kx as isize - pad;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let dst = &mut item[(iy as usize * w + ix as usize) * g.cin..][..g.cin];
                        let src = &row[(ky * g.ks + kx) * g.cin..][..g.cin];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
}

/// Weight layout is `[ks, ks, cin, cout]`, i.e. an im2col-ordered
/// `patch_len x cout` matrix.
pub fn conv_forward<T: Scalar>(x: &Tensor<T>, g: &ConvGeom, weight: &[T], bias: Option<&[T]>) -> Tensor<T> {
    assert_eq!(x.c, g.cin, "conv input channels");
    let ho = g.out_size(x.h);
    let wo = g.out_size(x.w);
    let plen = g.patch_len();
    let mut y = Tensor::zeros(x.n, ho, wo, g.cout);
    if let Some(b) = bias {
        for px in y.data.chunks_exact_mut(g.cout) {
            px.copy_from_slice(b);
        }
    }
    let beta = if bias.is_some() { T::one() } else { T::zero() };
    let per = chunk_items(ho * wo);
    let mut col = vec![T::zero(); per.min(x.n) * ho * wo * plen];
    let out_item = ho * wo * g.cout;
    for b0 in (0..x.n).step_by(per) {
        let b1 = (b0 + per).min(x.n);
        let rows = (b1 - b0) * ho * wo;
        let col = &mut col[..rows * plen];
        im2col_into(x, g, b0..b1, ho, wo, col);
        gemm(
            MatRef::new(col, rows, plen),
            MatRef::new(weight, plen, g.cout),
            beta,
            &mut y.data[b0 * out_item..b1 * out_item],
        );
    }
    y
}

/// Gradients of a convolution; `None` for parts that were not requested.
pub struct ConvGrads<T> {
    pub dx: Option<Tensor<T>>,
    pub dw: Option<Vec<T>>,
    pub db: Option<Vec<T>>,
}

/// Weights of the stride-1 convolution whose forward pass equals the input
/// gradient of `g`: spatially flipped, input and output channels swapped.
fn flipped_weight<T: Scalar>(g: &ConvGeom, weight: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); weight.len()];
    let ks = g.ks;
    for ky in 0..ks {
        for kx in 0..ks {
            let src_tap = ((ks - 1 - ky) * ks + (ks - 1 - kx)) * g.cin * g.cout;
            let dst_tap = (ky * ks + kx) * g.cout * g.cin;
            for ci in 0..g.cin {
                for co in 0..g.cout {
                    out[dst_tap + co * g.cin + ci] = weight[src_tap + ci * g.cout + co];
                }
            }
        }
    }
    out
}

pub fn conv_backward<T: Scalar>(
    x: &Tensor<T>,
    g: &ConvGeom,
    weight: &[T],
    dy: &Tensor<T>,
    with_bias: bool,
    want_params: bool,
    want_input: bool,
) -> ConvGrads<T> {
    let (ho, wo) = (dy.h, dy.w);
    let plen = g.patch_len();
    let per = chunk_items(ho * wo);
    let out_item = ho * wo * g.cout;
    let mut out = ConvGrads {
        dx: None,
        dw: None,
        db: None,
    };
    let mut col = Vec::new();
    if want_params {
        col = vec![T::zero(); per.min(x.n) * ho * wo * plen];
        let mut dw = vec![T::zero(); g.weight_len()];
        for b0 in (0..x.n).step_by(per) {
            let b1 = (b0 + per).min(x.n);
            let rows = (b1 - b0) * ho * wo;
            let col = &mut col[..rows * plen];
            im2col_into(x, g, b0..b1, ho, wo, col);
            gemm(
                MatRef::new(col, rows, plen).t(),
                MatRef::new(&dy.data[b0 * out_item..b1 * out_item], rows, g.cout),
                T::one(),
                &mut dw,
            );
        }
        out.dw = Some(dw);
        if with_bias {
            let mut db = vec![T::zero(); g.cout];
            for px in dy.data.chunks_exact(g.cout) {
                for (d, &v) in db.iter_mut().zip(px) {
                    *d = *d + v;
                }
            }
            out.db = Some(db);
        }
    }
    if want_input {
        if g.stride == 1 {
            let back = ConvGeom {
                ks: g.ks,
                stride: 1,
                cin: g.cout,
                cout: g.cin,
            };
            out.dx = Some(conv_forward(dy, &back, &flipped_weight(g, weight), None));
        } else {
            let mut dx = Tensor::zeros(x.n, x.h, x.w, g.cin);
            col.resize(per.min(x.n) * ho * wo * plen, T::zero());
            for b0 in (0..x.n).step_by(per) {
                let b1 = (b0 + per).min(x.n);
                let rows = (b1 - b0) * ho * wo;
                let dcol = &mut col[..rows * plen];
                gemm(
                    MatRef::new(&dy.data[b0 * out_item..b1 * out_item], rows, g.cout),
                    MatRef::new(weight, plen, g.cout).t(),
                    T::zero(),
                    dcol,
                );
                col2im_add(dcol, g, b0..b1, ho, wo, &mut dx);
            }
            out.dx = Some(dx);
        }
    }
    out
}

pub fn dense_forward<T: Scalar>(x: &[T], n: usize, weight: &[T], fout: usize, bias: Option<&[T]>) -> Vec<T> {
    let fin = x.len() / n.max(1);
    let mut y = vec![T::zero(); n * fout];
    if let Some(b) = bias {
        for row in y.chunks_exact_mut(fout) {
            row.copy_from_slice(b);
        }
    }
    let beta = if bias.is_some() { T::one() } else { T::zero() };
    gemm(MatRef::new(x, n, fin), MatRef::new(weight, fin, fout), beta, &mut y);
    y
}

/// Returns `(dx, dW, db)`.
pub fn dense_backward<T: Scalar>(
    x: &[T],
    n: usize,
    weight: &[T],
    fout: usize,
    dy: &[T],
    want_input: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let fin = x.len() / n.max(1);
    let mut dw = vec![T::zero(); fin * fout];
    gemm(MatRef::new(x, n, fin).t(), MatRef::new(dy, n, fout), T::zero(), &mut dw);
    let mut db = vec![T::zero(); fout];
    for row in dy.chunks_exact(fout) {
        for (d, &v) in db.iter_mut().zip(row) {
            *d = *d + v;
        }
    }
    let dx = want_input.then(|| {
        let mut dx = vec![T::zero(); n * fin];
        gemm(MatRef::new(dy, n, fout), MatRef::new(weight, fin, fout).t(), T::zero(), &mut dx);
        dx
    });
    (dx, dw, db)
}

pub fn upsample2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (h2, w2) = (x.h * 2, x.w * 2);
    let mut y = Tensor::zeros(x.n, h2, w2, x.c);
    for b in 0..x.n {
        for yy in 0..h2 {
            for xx in 0..w2 {
                let src = ((b * x.h + yy / 2) * x.w + xx / 2) * x.c;
                let dst = ((b * h2 + yy) * w2 + xx) * x.c;
                y.data[dst..dst + x.c].copy_from_slice(&x.data[src..src + x.c]);
            }
        }
    }
    y
}

pub fn upsample2_backward<T: Scalar>(dy: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor::zeros(dy.n, h, w, dy.c);
    for b in 0..dy.n {
        for yy in 0..dy.h {
            for xx in 0..dy.w {
                let src = ((b * dy.h + yy) * dy.w + xx) * dy.c;
                let dst = ((b * h + yy / 2) * w + xx / 2) * dy.c;
                for c in 0..dy.c {
                    dx.data[dst + c] = dx.data[dst + c] + dy.data[src + c];
                }
            }
        }
    }
    dx
}

pub fn leaky_relu<T: Scalar>(x: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for v in x {
        if *v < T::zero() {
            *v = *v * slope;
        }
    }
}

/// Uses the activation output: its sign equals the input's sign.
pub fn leaky_relu_backward<T: Scalar>(y: &[T], dy: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for (d, &v) in dy.iter_mut().zip(y) {
        if v < T::zero() {
            *d = *d * slope;
        }
    }
}

/// Normalized activations and inverse standard deviations of a
/// training-mode batch-norm.
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Batch statistics per channel over `(n, h, w)`.
pub fn batch_norm<T: Scalar>(x: &Tensor<T>, gamma: &[T], beta: &[T]) -> (Tensor<T>, BnCache<T>) {
    let c = x.c;
    let count = (x.data.len() / c) as f64;
    let mut mean = vec![0.0f64; c];
    for px in x.data.chunks_exact(c) {
        for (m, &v) in mean.iter_mut().zip(px) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0f64; c];
    for px in x.data.chunks_exact(c) {
        for ((s, &v), m) in var.iter_mut().zip(px).zip(&mean) {
            let d = v.as_f64() - m;
            *s += d * d;
        }
    }
    let inv_std: Vec<T> = var
        .iter()
        .map(|s| T::from_f64(1.0 / libm::sqrt(s / count + BN_EPS)))
        .collect();
    let mean_t: Vec<T> = mean.iter().map(|&m| T::from_f64(m)).collect();
    let mut xhat = x.data.clone();
    let mut y = Tensor::zeros(x.n, x.h, x.w, c);
    for (px, out) in xhat.chunks_exact_mut(c).zip(y.data.chunks_exact_mut(c)) {
        for ch in 0..c {
            px[ch] = (px[ch] - mean_t[ch]) * inv_std[ch];
            out[ch] = px[ch] * gamma[ch] + beta[ch];
        }
    }
    (y, BnCache { xhat, inv_std })
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn batch_norm_backward<T: Scalar>(cache: &BnCache<T>, gamma: &[T], dy: &Tensor<T>) -> (Tensor<T>, Vec<T>, Vec<T>) {
    let c = dy.c;
    let count = dy.data.len() / c;
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    for (d, xh) in dy.data.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for ch in 0..c {
            dbeta[ch] += d[ch].as_f64();
            dgamma[ch] += (d[ch] * xh[ch]).as_f64();
        }
    }
    // dx = gamma * inv_std / N * (N dy - sum(dy) - xhat * sum(dy * xhat))
    let nf = count as f64;
    let scale: Vec<T> = (0..c)
        .map(|ch| gamma[ch] * cache.inv_std[ch] * T::from_f64(1.0 / nf))
        .collect();
    let sum_dy: Vec<T> = dbeta.iter().map(|&v| T::from_f64(v)).collect();
    let sum_dyx: Vec<T> = dgamma.iter().map(|&v| T::from_f64(v)).collect();
    let nt = T::from_f64(nf);
    let mut dx = Tensor::zeros(dy.n, dy.h, dy.w, c);
    for ((out, d), xh) in dx
        .data
        .chunks_exact_mut(c)
        .zip(dy.data.chunks_exact(c))
        .zip(cache.xhat.chunks_exact(c))
    {
        for ch in 0..c {
            out[ch] = scale[ch] * (nt * d[ch] - sum_dy[ch] - xh[ch] * sum_dyx[ch]);
        }
    }
    (
        dx,
        dgamma.into_iter().map(T::from_f64).collect(),
        dbeta.into_iter().map(T::from_f64).collect(),
    )
}

/// Softmax over the innermost (class) axis, in place.
pub fn softmax_channels<T: Scalar>(x: &mut [T], c: usize) {
    for px in x.chunks_exact_mut(c) {
        let max = px.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in px.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Gradient through a softmax given its output `p` and `dL/dp`.
pub fn softmax_channels_backward<T: Scalar>(p: &[T], dp: &mut [T], c: usize) {
    for (pp, dd) in p.chunks_exact(c).zip(dp.chunks_exact_mut(c)) {
        let dot = pp.iter().zip(dd.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        for (d, &q) in dd.iter_mut().zip(pp) {
            *d = q * (*d - dot);
        }
    }
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}
