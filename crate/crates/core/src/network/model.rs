//! Forward and backward passes of the fully convolutional regressor.
//!
//! Each block is conv 3³ → [batch norm] → max-pool 2³ → ReLU. The head is a
//! 1³ convolution with ReLU, global average pooling, dropout (training only)
//! and a linear layer producing either bin logits or one scalar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Loss, LossKind, NetConfig};
use super::layers::{self, BnCache, Tensor};
use super::params::{Grads, Layout, Params};
use crate::error::{Error, Result};
use crate::softbin;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Batch statistics and dropout; `dropout_key` seeds the dropout masks.
    Train { dropout_key: u64 },
}

struct BlockCache {
    input: Tensor,
    bn: Option<BnCache>,
    pool_arg: Vec<u32>,
    conv_shape: [usize; 5],
    /// Post-ReLU output (the next block's input).
    output: Tensor,
}

/// Everything the backward pass needs from one forward pass.
pub struct Cache {
    blocks: Vec<BlockCache>,
    /// Head features after 1³ conv + ReLU: `[batch, head, voxels]`.
    head_act: Vec<f64>,
    head_voxels: usize,
    /// Dropout multipliers (0 or 1/(1−p)) per `[batch, head]`.
    dropout: Vec<f64>,
    /// Linear-layer input per `[batch, head]`.
    features: Vec<f64>,
    batch: usize,
    training: bool,
}

impl Cache {
    /// Batch mean and unbiased variance of each batch-norm layer.
    pub fn batch_stats(&self) -> Vec<Option<(&[f64], &[f64])>> {
        self.blocks
            .iter()
            .map(|b| {
                b.bn.as_ref()
                    .filter(|c| c.training)
                    .map(|c| (c.batch_mean.as_slice(), c.batch_var.as_slice()))
            })
            .collect()
    }
}

/// Raw network outputs `[batch, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub batch: usize,
    pub width: usize,
    pub raw: Vec<f64>,
}

impl Output {
    pub fn row(&self, b: usize) -> &[f64] {
        &self.raw[b * self.width..(b + 1) * self.width]
    }
}

pub fn forward(params: &Params, config: &NetConfig, input: &Tensor, mode: Mode) -> Result<(Output, Cache)> {
    if input.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "network expects one input channel, got {}",
            input.channels()
        )));
    }
    let m = config.spatial_multiple();
    if input.spatial().iter().any(|&s| s == 0 || s % m != 0) {
        return Err(Error::ShapeMismatch(format!(
            "input extents {:?} must be positive multiples of {m}",
            input.spatial()
        )));
    }
    let layout = Layout::new(config);
    let t = &params.tensors;
    let training = matches!(mode, Mode::Train { .. });

    let mut blocks = Vec::with_capacity(layout.blocks.len());
    let mut x = input.clone();
    for (i, slots) in layout.blocks.iter().enumerate() {
        let conv = layers::conv3_forward(&x, &t[slots.weight].data, &t[slots.bias].data);
        let conv_shape = conv.shape;
        let (normed, bn) = match slots.bn {
            Some(bn) => {
                let running = (!training).then(|| {
                    (
                        t[bn.running_mean].data.as_slice(),
                        t[bn.running_var].data.as_slice(),
                    )
                });
                let (y, c) = layers::batchnorm_forward(&conv, &t[bn.gamma].data, &t[bn.beta].data, running);
                (y, Some(c))
            }
            None => (conv, None),
        };
        let (mut pooled, pool_arg) = layers::maxpool_forward(&normed);
        layers::relu_inplace(&mut pooled.data);
        if !pooled.all_finite() {
            return Err(Error::NonFiniteActivation(format!("block{i}")));
        }
        blocks.push(BlockCache {
            input: std::mem::replace(&mut x, pooled.clone()),
            bn,
            pool_arg,
            conv_shape,
            output: pooled,
        });
    }

    let batch = x.batch();
    let cin = x.channels();
    let voxels = x.plane_len();
    let head = config.head_channels;
    let hw = &t[layout.head_weight].data;
    let hb = &t[layout.head_bias].data;
    let mut head_act = vec![0.0; batch * head * voxels];
    for b in 0..batch {
        for h in 0..head {
            let out = &mut head_act[(b * head + h) * voxels..(b * head + h + 1) * voxels];
            out.fill(hb[h]);
            for c in 0..cin {
                let w = hw[h * cin + c];
                for (o, &v) in out.iter_mut().zip(x.plane(b, c)) {
                    *o += w * v;
                }
            }
            layers::relu_inplace(out);
        }
    }
    let pooled: Vec<f64> = head_act
        .chunks(voxels)
        .map(|c| c.iter().sum::<f64>() / voxels as f64)
        .collect();

    let dropout = match mode {
        Mode::Train { dropout_key } if config.dropout_rate > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_key);
            let keep = 1.0 / (1.0 - config.dropout_rate);
            (0..batch * head)
                .map(|_| if rng.random::<f64>() < config.dropout_rate { 0.0 } else { keep })
                .collect()
        }
        _ => vec![1.0; batch * head],
    };
    let features: Vec<f64> = pooled.iter().zip(&dropout).map(|(a, d)| a * d).collect();

    let width = config.output.width();
    let ow = &t[layout.out_weight].data;
    let ob = &t[layout.out_bias].data;
    let mut raw = vec![0.0; batch * width];
    for b in 0..batch {
        let f = &features[b * head..(b + 1) * head];
        for o in 0..width {
            raw[b * width + o] = ob[o] + layers::dot(&ow[o * head..(o + 1) * head], f);
        }
    }
    if head_act.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation("head".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation("output".into()));
    }
    Ok((
        Output { batch, width, raw },
        Cache {
            blocks,
            head_act,
            head_voxels: voxels,
            dropout,
            features,
            batch,
            training,
        },
    ))
}

pub fn backward(params: &Params, config: &NetConfig, cache: &Cache, grad_raw: &[f64]) -> Result<Grads> {
    if !cache.training {
        return Err(Error::MissingCache);
    }
    let layout = Layout::new(config);
    let t = &params.tensors;
    let batch = cache.batch;
    let width = config.output.width();
    let head = config.head_channels;
    if grad_raw.len() != batch * width {
        return Err(Error::LengthMismatch(grad_raw.len(), batch * width));
    }
    let mut grads = Grads::zeros_like(params);

    // linear layer
    let ow = &t[layout.out_weight].data;
    let mut dfeat = vec![0.0; batch * head];
    for b in 0..batch {
        let f = &cache.features[b * head..(b + 1) * head];
        for o in 0..width {
            let g = grad_raw[b * width + o];
            grads.tensors[layout.out_bias][o] += g;
            let gw = &mut grads.tensors[layout.out_weight][o * head..(o + 1) * head];
            for (w, &fv) in gw.iter_mut().zip(f) {
                *w += g * fv;
            }
            for (d, &w) in dfeat[b * head..(b + 1) * head].iter_mut().zip(&ow[o * head..(o + 1) * head]) {
                *d += g * w;
            }
        }
    }

    // dropout, global average pool, ReLU, 1³ conv
    let last = cache.blocks.last().ok_or(Error::MissingCache)?;
    let x = &last.output;
    let cin = x.channels();
    let voxels = cache.head_voxels;
    let hw = &t[layout.head_weight].data;
    let mut dx = Tensor::zeros(x.shape);
    for b in 0..batch {
        for h in 0..head {
            let g = dfeat[b * head + h] * cache.dropout[b * head + h] / voxels as f64;
            if g == 0.0 {
                continue;
            }
            let act = &cache.head_act[(b * head + h) * voxels..(b * head + h + 1) * voxels];
            let dpre: Vec<f64> = act.iter().map(|&a| if a > 0.0 { g } else { 0.0 }).collect();
            grads.tensors[layout.head_bias][h] += dpre.iter().sum::<f64>();
            for c in 0..cin {
                grads.tensors[layout.head_weight][h * cin + c] += layers::dot(&dpre, x.plane(b, c));
                let w = hw[h * cin + c];
                let off = (b * cin + c) * voxels;
                for (d, &p) in dx.data[off..off + voxels].iter_mut().zip(&dpre) {
                    *d += w * p;
                }
            }
        }
    }

    // convolution blocks, last to first
    for (i, (slots, bc)) in layout.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        layers::relu_backward_inplace(&mut dx.data, &bc.output.data);
        let dnorm = layers::maxpool_backward(&dx, &bc.pool_arg, bc.conv_shape);
        let dconv = match (slots.bn, &bc.bn) {
            (Some(bn), Some(c)) => {
                let g = layers::batchnorm_backward(&dnorm, &t[bn.gamma].data, c);
                grads.tensors[bn.gamma] = g.gamma;
                grads.tensors[bn.beta] = g.beta;
                g.input
            }
            (None, None) => dnorm,
            _ => return Err(Error::MissingCache),
        };
        let g = layers::conv3_backward(&bc.input, &t[slots.weight].data, &dconv, i > 0);
        grads.tensors[slots.weight] = g.weight;
        grads.tensors[slots.bias] = g.bias;
        if let Some(gin) = g.input {
            dx = gin;
        }
    }
    Ok(grads)
}

/// Converts raw outputs to motion scores in mm/s.
pub fn decode_output(output: &Output, loss: &Loss) -> Vec<f64> {
    (0..output.batch)
        .map(|b| match loss.kind {
            LossKind::SoftbinKl => softbin::decode(&softbin::softmax(output.row(b)), &loss.grid),
            LossKind::Mse => output.row(b)[0],
        })
        .collect()
}

/// Batch-mean loss and its gradient with respect to the raw outputs.
pub fn loss_and_grad(output: &Output, targets: &[f64], loss: &Loss) -> Result<(f64, Vec<f64>)> {
    if targets.len() != output.batch {
        return Err(Error::LengthMismatch(targets.len(), output.batch));
    }
    let expected = loss.output_head();
    if expected.width() != output.width {
        return Err(Error::ShapeMismatch(format!(
            "loss {} expects {} outputs, network has {}",
            loss.kind,
            expected.width(),
            output.width
        )));
    }
    let n = output.batch as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; output.raw.len()];
    for (b, &target) in targets.iter().enumerate() {
        match loss.kind {
            LossKind::SoftbinKl => {
                let label = softbin::encode(target, &loss.grid, loss.sigma)?;
                let p = softbin::softmax(output.row(b));
                let (l, g) = softbin::kl_loss(&label, &p)?;
                total += l / n;
                for (dst, gv) in grad[b * output.width..(b + 1) * output.width].iter_mut().zip(g) {
                    *dst = gv / n;
                }
            }
            LossKind::Mse => {
                // the single output is the score itself; labels clamp to the
                // grid just as soft labels do
                let (l, g) = softbin::mse_head_loss(target.clamp(loss.grid.min, loss.grid.max), output.row(b)[0]);
                total += l / n;
                grad[b] = g / n;
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("loss {total}")));
    }
    Ok((total, grad))
}
