use super::params::{Grads, Params};

/// Adam with bias correction. Non-trainable tensors are left untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &Params, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut Params, grads: &Grads) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            if !p.trainable {
                continue;
            }
            for (((w, &g), m), v) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *w -= self.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::config::NetConfig;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = NetConfig {
            block_channels: vec![1],
            head_channels: 1,
            ..NetConfig::desk()
        };
        let mut p = Params::init(&cfg).unwrap();
        let before = p.clone();
        let mut g = Grads::zeros_like(&p);
        g.tensors.iter_mut().for_each(|t| t.fill(3.0));
        let mut adam = Adam::new(&p, 0.01, 0.9, 0.999, 1e-8);
        adam.update(&mut p, &g);
        for (a, b) in p.tensors.iter().zip(&before.tensors) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((y - x - 0.01).abs() < 1e-8);
            }
        }
        assert_eq!(adam.steps(), 1);
    }

    fn scalar_params(x: f64) -> Params {
        Params {
            tensors: vec![crate::network::Param {
                name: "x".into(),
                shape: vec![1],
                data: vec![x],
                trainable: true,
            }],
        }
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut p = scalar_params(0.3);
        let g = Grads::zeros_like(&p);
        let mut adam = Adam::new(&p, 0.1, 0.9, 0.999, 1e-8);
        for _ in 0..5 {
            adam.update(&mut p, &g);
        }
        assert_eq!(p.tensors[0].data[0], 0.3);
    }

    #[test]
    fn minimizes_a_quadratic() {
        // f(x) = x², gradient 2x; reference trajectory simulated by hand below
        let mut p = scalar_params(1.0);
        let mut adam = Adam::new(&p, 0.05, 0.9, 0.999, 1e-8);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=100 {
            let mut g = Grads::zeros_like(&p);
            g.tensors[0][0] = 2.0 * p.tensors[0].data[0];
            adam.update(&mut p, &g);
            let gx = 2.0 * x;
            m = 0.9 * m + 0.1 * gx;
            v = 0.999 * v + 0.001 * gx * gx;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.05 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.tensors[0].data[0] - x).abs() < 1e-12);
        assert!(x.abs() < 1e-2, "{x}");
    }
}
