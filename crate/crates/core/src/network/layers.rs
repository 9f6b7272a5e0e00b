//! Dense 3-D layers on `[batch, channel, z, y, x]` tensors.
//!
//! Convolutions are written as row-wise three-tap accumulations so that the
//! innermost loop runs over contiguous memory. Work is split across rayon
//! threads by output plane, and every reduction runs in a fixed order, so
//! results do not depend on the thread count.

use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 5],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 5]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn spatial(&self) -> [usize; 3] {
        [self.shape[2], self.shape[3], self.shape[4]]
    }

    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3] * self.shape[4]
    }

    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let n = self.plane_len();
        let start = (b * self.shape[1] + c) * n;
        &self.data[start..start + n]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product with eight independent accumulators (fixed summation order).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for i in 0..chunks {
        let (ca, cb) = (&a[i * 8..i * 8 + 8], &b[i * 8..i * 8 + 8]);
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Range of output positions `o` whose source `o + k - 1` lies in `[0, n)`.
#[inline]
fn valid(k: usize, n: usize) -> std::ops::Range<usize> {
    match k {
        0 => 1..n,
        1 => 0..n,
        _ => 0..n.saturating_sub(1),
    }
}

/// `out[z,y,x] += Σ k[a,b,c] · inp[z+a-1, y+b-1, x+c-1]` with zero padding.
fn correlate_acc(out: &mut [f64], inp: &[f64], k: &[f64], [d, h, w]: [usize; 3]) {
    for kz in 0..3 {
        for z in valid(kz, d) {
            let zi = z + kz - 1;
            for ky in 0..3 {
                let (k0, k1, k2) = (k[kz * 9 + ky * 3], k[kz * 9 + ky * 3 + 1], k[kz * 9 + ky * 3 + 2]);
                for y in valid(ky, h) {
                    let yi = y + ky - 1;
                    let orow = &mut out[(z * h + y) * w..(z * h + y + 1) * w];
                    let irow = &inp[(zi * h + yi) * w..(zi * h + yi + 1) * w];
                    if w == 1 {
                        orow[0] += k1 * irow[0];
                        continue;
                    }
                    orow[0] += k1 * irow[0] + k2 * irow[1];
                    orow[w - 1] += k0 * irow[w - 2] + k1 * irow[w - 1];
                    let inner = &mut orow[1..w - 1];
                    for (((o, &l), &c), &r) in inner
                        .iter_mut()
                        .zip(&irow[..w - 2])
                        .zip(&irow[1..w - 1])
                        .zip(&irow[2..])
                    {
                        *o += k0 * l + k1 * c + k2 * r;
                    }
                }
            }
        }
    }
}

/// `g[a,b,c] += Σ_{z,y,x} grad[z,y,x] · inp[z+a-1, y+b-1, x+c-1]`.
fn kernel_grad_acc(g: &mut [f64], grad: &[f64], inp: &[f64], [d, h, w]: [usize; 3]) {
    for kz in 0..3 {
        for ky in 0..3 {
            let mut acc = [0.0f64; 3];
            for z in valid(kz, d) {
                let zi = z + kz - 1;
                for y in valid(ky, h) {
                    let yi = y + ky - 1;
                    let grow = &grad[(z * h + y) * w..(z * h + y + 1) * w];
                    let irow = &inp[(zi * h + yi) * w..(zi * h + yi + 1) * w];
                    acc[1] += dot(grow, irow);
                    if w > 1 {
                        acc[0] += dot(&grow[1..], &irow[..w - 1]);
                        acc[2] += dot(&grow[..w - 1], &irow[1..]);
                    }
                }
            }
            for kx in 0..3 {
                g[kz * 9 + ky * 3 + kx] += acc[kx];
            }
        }
    }
}

/// 3×3×3 convolution, stride 1, zero padding 1. `weight` is `[cout, cin, 27]`.
pub fn conv3_forward(input: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
    let [bsz, cin, d, h, w] = input.shape;
    let cout = bias.len();
    debug_assert_eq!(weight.len(), cout * cin * 27);
    let mut out = Tensor::zeros([bsz, cout, d, h, w]);
    let n = out.plane_len();
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(idx, plane)| {
            let (b, co) = (idx / cout, idx % cout);
            plane.fill(bias[co]);
            for ci in 0..cin {
                let k = &weight[(co * cin + ci) * 27..(co * cin + ci + 1) * 27];
                correlate_acc(plane, input.plane(b, ci), k, [d, h, w]);
            }
        });
    out
}

pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv3_backward(input: &Tensor, weight: &[f64], grad_out: &Tensor, want_input: bool) -> ConvGrads {
    let [bsz, cin, d, h, w] = input.shape;
    let cout = grad_out.channels();
    let n = input.plane_len();

    let mut gw = vec![0.0; cout * cin * 27];
    gw.par_chunks_mut(cin * 27)
        .enumerate()
        .for_each(|(co, gco)| {
            for ci in 0..cin {
                let g = &mut gco[ci * 27..(ci + 1) * 27];
                for b in 0..bsz {
                    kernel_grad_acc(g, grad_out.plane(b, co), input.plane(b, ci), [d, h, w]);
                }
            }
        });
    let gb: Vec<f64> = (0..cout)
        .map(|co| (0..bsz).map(|b| grad_out.plane(b, co).iter().sum::<f64>()).sum())
        .collect();

    let gin = want_input.then(|| {
        let mut gin = Tensor::zeros(input.shape);
        gin.data.par_chunks_mut(n).enumerate().for_each(|(idx, plane)| {
            let (b, ci) = (idx / cin, idx % cin);
            let mut flipped = [0.0; 27];
            for co in 0..cout {
                let k = &weight[(co * cin + ci) * 27..(co * cin + ci + 1) * 27];
                for (j, f) in flipped.iter_mut().enumerate() {
                    *f = k[26 - j];
                }
                correlate_acc(plane, grad_out.plane(b, co), &flipped, [d, h, w]);
            }
        });
        gin
    });
    ConvGrads {
        input: gin,
        weight: gw,
        bias: gb,
    }
}

/// 2×2×2 max pooling with stride 2. Also returns, per output voxel, the
/// index within the input plane of the (first) maximum.
pub fn maxpool_forward(input: &Tensor) -> (Tensor, Vec<u32>) {
    let [bsz, c, d, h, w] = input.shape;
    let (od, oh, ow) = (d / 2, h / 2, w / 2);
    let mut out = Tensor::zeros([bsz, c, od, oh, ow]);
    let on = out.plane_len();
    let mut arg = vec![0u32; out.data.len()];
    out.data
        .par_chunks_mut(on)
        .zip(arg.par_chunks_mut(on))
        .enumerate()
        .for_each(|(idx, (plane, aplane))| {
            let src = input.plane(idx / c, idx % c);
            for z in 0..od {
                for y in 0..oh {
                    for x in 0..ow {
                        let mut best_i = ((2 * z) * h + 2 * y) * w + 2 * x;
                        let mut best = src[best_i];
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let i = ((2 * z + dz) * h + 2 * y + dy) * w + 2 * x + dx;
                                    if src[i] > best {
                                        best = src[i];
                                        best_i = i;
                                    }
                                }
                            }
                        }
                        let o = (z * oh + y) * ow + x;
                        plane[o] = best;
                        aplane[o] = best_i as u32;
                    }
                }
            }
        });
    (out, arg)
}

pub fn maxpool_backward(grad_out: &Tensor, argmax: &[u32], input_shape: [usize; 5]) -> Tensor {
    let mut gin = Tensor::zeros(input_shape);
    let n = gin.plane_len();
    let on = grad_out.plane_len();
    gin.data.par_chunks_mut(n).enumerate().for_each(|(idx, plane)| {
        let g = &grad_out.data[idx * on..(idx + 1) * on];
        let a = &argmax[idx * on..(idx + 1) * on];
        for (&gv, &ai) in g.iter().zip(a) {
            plane[ai as usize] += gv;
        }
    });
    gin
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel statistics saved by a batch-norm forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    /// Batch mean and unbiased variance (training mode only).
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub training: bool,
}

/// Batch normalization over `(batch, z, y, x)` for each channel. In training
/// mode the batch statistics are used; otherwise the running ones.
pub fn batchnorm_forward(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running: Option<(&[f64], &[f64])>,
) -> (Tensor, BnCache) {
    let [bsz, c, ..] = x.shape;
    let n = x.plane_len();
    let count = (bsz * n) as f64;
    let training = running.is_none();
    let (mean, var): (Vec<f64>, Vec<f64>) = match running {
        Some((m, v)) => (m.to_vec(), v.to_vec()),
        None => (0..c)
            .map(|ch| {
                let mean = (0..bsz).map(|b| x.plane(b, ch).iter().sum::<f64>()).sum::<f64>() / count;
                let var = (0..bsz)
                    .map(|b| x.plane(b, ch).iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                    .sum::<f64>()
                    / count;
                (mean, var)
            })
            .unzip(),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.shape);
    let mut y = Tensor::zeros(x.shape);
    for b in 0..bsz {
        for ch in 0..c {
            let off = (b * c + ch) * n;
            let src = x.plane(b, ch);
            for i in 0..n {
                let xh = (src[i] - mean[ch]) * inv_std[ch];
                xhat.data[off + i] = xh;
                y.data[off + i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
    let cache = BnCache {
        xhat,
        inv_std,
        batch_var: var.iter().map(|v| v * unbias).collect(),
        batch_mean: mean,
        training,
    };
    (y, cache)
}

pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn batchnorm_backward(grad_out: &Tensor, gamma: &[f64], cache: &BnCache) -> BnGrads {
    let [bsz, c, ..] = grad_out.shape;
    let n = grad_out.plane_len();
    let count = (bsz * n) as f64;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        for b in 0..bsz {
            let g = grad_out.plane(b, ch);
            dgamma[ch] += dot(g, cache.xhat.plane(b, ch));
            dbeta[ch] += g.iter().sum::<f64>();
        }
    }
    let mut gin = Tensor::zeros(grad_out.shape);
    for b in 0..bsz {
        for ch in 0..c {
            let off = (b * c + ch) * n;
            let g = grad_out.plane(b, ch);
            let xh = cache.xhat.plane(b, ch);
            let s = gamma[ch] * cache.inv_std[ch];
            for i in 0..n {
                gin.data[off + i] = if cache.training {
                    s * (g[i] - dbeta[ch] / count - xh[i] * dgamma[ch] / count)
                } else {
                    s * g[i]
                };
            }
        }
    }
    BnGrads {
        input: gin,
        gamma: dgamma,
        beta: dbeta,
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Zeroes gradient entries where the forward activation was not positive.
pub fn relu_backward_inplace(grad: &mut [f64], activation: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}
