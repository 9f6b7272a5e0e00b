//! Prototype-bin encoding of motion scores.
//!
//! The motion range is split into equal-width bins; a ground-truth score is
//! encoded as a Gaussian soft label over the bin centers, the network is
//! trained with the Kullback-Leibler divergence, and a prediction is decoded
//! as the probability-weighted mean of the centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for BinGrid {
    /// 40 bins over [0, 3.12] mm/s.
    fn default() -> Self {
        Self {
            min: 0.0,
            max: 3.12,
            count: 40,
        }
    }
}

impl BinGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let g = Self { min, max, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite()
        {
            return Err(Error::Config(format!(
                "bin grid needs count >= 2 and max > min, got [{}, {}] x {}",
                self.min, self.max, self.count
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.center(i)).collect()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Gaussian soft label: `p_i ∝ exp(−(v − c_i)² / 2σ²)`. Out-of-range values are clamped.
pub fn encode(value: f64, grid: &BinGrid, sigma: f64) -> Result<Vec<f64>> {
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("motion score {value}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let v = if value < grid.min || value > grid.max {
        log::warn!(
            "score {value} outside [{}, {}], clamped before encoding",
            grid.min,
            grid.max
        );
        value.clamp(grid.min, grid.max)
    } else {
        value
    };
    // log-sum-exp keeps tiny sigmas from underflowing to an all-zero label
    let logits: Vec<f64> = grid
        .centers()
        .iter()
        .map(|c| -(v - c).powi(2) / (2.0 * sigma * sigma))
        .collect();
    Ok(softmax(&logits))
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Expected value of the bin centers.
pub fn decode(probabilities: &[f64], grid: &BinGrid) -> f64 {
    let w = grid.width();
    probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| p * (grid.min + (i as f64 + 0.5) * w))
        .sum()
}

/// `KL(target ‖ pred)` and its gradient with respect to the pre-softmax logits.
pub fn kl_loss(target: &[f64], pred: &[f64]) -> Result<(f64, Vec<f64>)> {
    if target.len() != pred.len() {
        return Err(Error::LengthMismatch(target.len(), pred.len()));
    }
    let mut loss = 0.0;
    for (i, (&t, &p)) in target.iter().zip(pred).enumerate() {
        if t > 0.0 {
            if !(p > 0.0) {
                return Err(Error::InfiniteLoss { bin: i, target: t });
            }
            loss += t * (t.ln() - p.ln());
        }
    }
    let mass: f64 = target.iter().sum();
    let grad = target.iter().zip(pred).map(|(t, p)| p * mass - t).collect();
    Ok((loss, grad))
}

/// Squared error of a direct regression head and its derivative in the prediction.
pub fn mse_head_loss(value: f64, predicted: f64) -> (f64, f64) {
    let d = predicted - value;
    (d * d, 2.0 * d)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        softmax(&logits)
    }

    #[test]
    fn grid_defaults() {
        let g = BinGrid::default();
        assert!((g.width() - 0.078).abs() < 1e-15);
        assert!((g.center(0) - 0.039).abs() < 1e-15);
        assert!(BinGrid::new(1.0, 1.0, 40).is_err());
        assert!(BinGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn midpoint_label_is_symmetric() {
        let g = BinGrid::default();
        let p = encode(1.56, &g, g.width()).unwrap();
        for i in 0..20 {
            assert!((p[i] - p[39 - i]).abs() < 1e-12);
        }
        let argmax = (0..40).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert!(argmax == 19 || argmax == 20);
    }

    #[test]
    fn narrow_label_is_one_hot() {
        let g = BinGrid::default();
        let p = encode(g.center(7), &g, g.width() / 10.0).unwrap();
        assert!(p[7] > 0.999);
    }

    #[test]
    fn decode_of_encode_recovers_interior_centers() {
        let g = BinGrid::default();
        for j in 1..39 {
            let p = encode(g.center(j), &g, g.width()).unwrap();
            assert!((decode(&p, &g) - g.center(j)).abs() < g.width() / 2.0, "bin {j}");
        }
    }

    #[test]
    fn decode_cases() {
        let g = BinGrid::default();
        assert!((decode(&[1.0 / 40.0; 40], &g) - 1.56).abs() < 1e-12);
        let mut one_hot = vec![0.0; 40];
        one_hot[0] = 1.0;
        assert!((decode(&one_hot, &g) - 0.039).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_values_clamp() {
        let g = BinGrid::default();
        assert_eq!(encode(9.0, &g, 0.078).unwrap(), encode(3.12, &g, 0.078).unwrap());
        assert_eq!(encode(-1.0, &g, 0.078).unwrap(), encode(0.0, &g, 0.078).unwrap());
        assert!(encode(f64::NAN, &g, 0.078).is_err());
        assert!(encode(1.0, &g, 0.0).is_err());
    }

    #[test]
    fn kl_closed_forms() {
        let p = vec![0.25; 4];
        let (loss, grad) = kl_loss(&p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| g.abs() < 1e-15));

        let mut t = vec![0.0; 40];
        t[3] = 1.0;
        let (loss, _) = kl_loss(&t, &[1.0 / 40.0; 40]).unwrap();
        assert!((loss - 40f64.ln()).abs() < 1e-12);
        assert!((loss - 3.6889).abs() < 1e-4);

        let mut pred = vec![0.5, 0.5, 0.0];
        let target = vec![0.0, 0.5, 0.5];
        assert!(matches!(
            kl_loss(&target, &pred),
            Err(Error::InfiniteLoss { bin: 2, .. })
        ));
        pred.swap(0, 2);
        assert!(kl_loss(&[0.0, 0.5, 0.5], &pred).is_ok());
    }

    #[test]
    fn kl_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let target = random_simplex(&mut rng, 40);
            let logits: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, grad) = kl_loss(&target, &softmax(&logits)).unwrap();
            let h = 1e-6;
            for i in 0..40 {
                let mut up = logits.clone();
                up[i] += h;
                let mut dn = logits.clone();
                dn[i] -= h;
                let fd = (kl_loss(&target, &softmax(&up)).unwrap().0
                    - kl_loss(&target, &softmax(&dn)).unwrap().0)
                    / (2.0 * h);
                let scale = grad[i].abs().max(1e-3);
                assert!((fd - grad[i]).abs() / scale < 1e-6, "{fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse_head_loss(0.7, 0.7), (0.0, 0.0));
        assert_eq!(mse_head_loss(0.0, 1.0), (1.0, 2.0));
        let (v, p, h) = (0.3, 1.1, 1e-6);
        let fd = (mse_head_loss(v, p + h).0 - mse_head_loss(v, p - h).0) / (2.0 * h);
        assert!((fd - mse_head_loss(v, p).1).abs() < 1e-8);
    }

    #[test]
    fn decode_matches_naive_dot_product() {
        let g = BinGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = random_simplex(&mut rng, 40);
            let centers = g.centers();
            let mut naive = 0.0;
            for i in 0..40 {
                naive += p[i] * centers[i];
            }
            assert!((decode(&p, &g) - naive).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn encode_normalizes(value in -5.0f64..8.0, sigma in 1e-3f64..2.0) {
            let p = encode(value, &BinGrid::default(), sigma).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn kl_is_nonnegative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_simplex(&mut rng, 40);
            let p = random_simplex(&mut rng, 40);
            prop_assert!(kl_loss(&t, &p).unwrap().0 >= 0.0);
            prop_assert!(kl_loss(&t, &t).unwrap().0.abs() < 1e-15);
        }

        #[test]
        fn decode_stays_inside_center_range(seed in any::<u64>()) {
            let g = BinGrid::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = decode(&random_simplex(&mut rng, 40), &g);
            prop_assert!(d >= g.center(0) - 1e-12 && d <= g.center(39) + 1e-12);
        }

        #[test]
        fn symmetric_perturbation_keeps_midpoint(seed in any::<u64>(), eps in 0.0f64..0.01) {
            let g = BinGrid::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let half: Vec<f64> = (0..20).map(|_| rng.random_range(0.02..1.0)).collect();
            let mut p: Vec<f64> = half.iter().chain(half.iter().rev()).copied().collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            let k = (seed % 19) as usize;
            p[k] += eps; p[39 - k] += eps; p[k + 1] -= eps; p[38 - k] -= eps;
            prop_assert!((decode(&p, &g) - 1.56).abs() < 1e-12);
        }
    }
}
