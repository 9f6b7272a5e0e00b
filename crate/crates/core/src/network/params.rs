use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Init, NetConfig, Norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Running batch-norm statistics are stored here too but not optimized.
    pub trainable: bool,
}

impl Param {
    fn new(name: String, shape: Vec<usize>, trainable: bool) -> Self {
        let n = shape.iter().product();
        Self {
            name,
            shape,
            data: vec![0.0; n],
            trainable,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tensors: Vec<Param>,
}

/// Gradients in the same order and shapes as [`Params::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(params: &Params) -> Self {
        Self {
            tensors: params.tensors.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Indices into [`Params::tensors`] for one convolution block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSlots {
    pub weight: usize,
    pub bias: usize,
    pub bn: Option<BnSlots>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BnSlots {
    pub gamma: usize,
    pub beta: usize,
    pub running_mean: usize,
    pub running_var: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<BlockSlots>,
    pub head_weight: usize,
    pub head_bias: usize,
    pub out_weight: usize,
    pub out_bias: usize,
}

impl Layout {
    pub fn new(config: &NetConfig) -> Self {
        let mut next = 0usize;
        let mut take = || {
            next += 1;
            next - 1
        };
        let blocks = config
            .block_channels
            .iter()
            .map(|_| {
                let weight = take();
                let bias = take();
                let bn = (config.norm == Norm::Batch).then(|| BnSlots {
                    gamma: take(),
                    beta: take(),
                    running_mean: take(),
                    running_var: take(),
                });
                BlockSlots { weight, bias, bn }
            })
            .collect();
        Layout {
            blocks,
            head_weight: take(),
            head_bias: take(),
            out_weight: take(),
            out_bias: take(),
        }
    }
}

fn fill(rng: &mut ChaCha8Rng, data: &mut [f64], init: Init, fan_in: usize, fan_out: usize) {
    match init {
        Init::HeNormal => {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            data.iter_mut().for_each(|w| *w = normal.sample(rng));
        }
        Init::XavierUniform => {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            data.iter_mut().for_each(|w| *w = rng.random_range(-a..a));
        }
    }
}

impl Params {
    /// Freshly initialized parameters; biases zero, batch-norm scale one.
    pub fn init(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut tensors = Vec::new();
        let mut cin = 1usize;
        for (i, &cout) in config.block_channels.iter().enumerate() {
            let mut w = Param::new(format!("block{i}.conv.weight"), vec![cout, cin, 3, 3, 3], true);
            fill(&mut rng, &mut w.data, config.init, cin * 27, cout * 27);
            tensors.push(w);
            tensors.push(Param::new(format!("block{i}.conv.bias"), vec![cout], true));
            if config.norm == Norm::Batch {
                let mut gamma = Param::new(format!("block{i}.bn.gamma"), vec![cout], true);
                gamma.data.fill(1.0);
                tensors.push(gamma);
                tensors.push(Param::new(format!("block{i}.bn.beta"), vec![cout], true));
                tensors.push(Param::new(format!("block{i}.bn.running_mean"), vec![cout], false));
                let mut var = Param::new(format!("block{i}.bn.running_var"), vec![cout], false);
                var.data.fill(1.0);
                tensors.push(var);
            }
            cin = cout;
        }
        let head = config.head_channels;
        let mut hw = Param::new("head.conv.weight".into(), vec![head, cin], true);
        fill(&mut rng, &mut hw.data, config.init, cin, head);
        tensors.push(hw);
        tensors.push(Param::new("head.conv.bias".into(), vec![head], true));
        let out = config.output.width();
        let mut ow = Param::new("out.weight".into(), vec![out, head], true);
        fill(&mut rng, &mut ow.data, config.init, head, out);
        tensors.push(ow);
        tensors.push(Param::new("out.bias".into(), vec![out], true));
        Ok(Self { tensors })
    }

    /// Checks names and shapes against what `config` expects.
    pub fn check_matches(&self, config: &NetConfig) -> Result<()> {
        let reference = Params::init(config)?;
        if reference.tensors.len() != self.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter tensors, found {}",
                reference.tensors.len(),
                self.tensors.len()
            )));
        }
        for (r, p) in reference.tensors.iter().zip(&self.tensors) {
            if r.name != p.name || r.shape != p.shape || p.data.len() != r.data.len() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    p.name, p.shape, r.name, r.shape
                )));
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Param::len).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors
            .iter()
            .filter(|p| p.trainable)
            .map(Param::len)
            .sum()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.tensors.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.tensors.iter_mut().find(|p| p.name == name)
    }

    /// Zeroes the final layer so every input maps to the same output.
    pub fn zero_output_layer(&mut self) {
        for name in ["out.weight", "out.bias"] {
            if let Some(p) = self.get_mut(name) {
                p.data.fill(0.0);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}
