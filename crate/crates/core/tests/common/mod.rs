#![allow(dead_code)]

pub mod formats;

use headmotion::network::{backward, forward, loss_and_grad, Loss, Mode, NetConfig, Params, Tensor};
use headmotion::preprocess::lsb8;
use headmotion::rigid_motion::Trajectory;
use headmotion::simulate::{corrupt_kspace, make_phantom, synth_trajectory, ReadoutSchedule, TrajectorySpec};
use headmotion::volume_io::Volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 32³ phantom corrupted by breathing motion of the given level, LSB8-scaled.
pub fn corrupted(seed: u64, level: f64) -> Volume {
    let phantom = make_phantom([32; 3], [4.0; 3], seed).unwrap();
    let spec = TrajectorySpec {
        breathing_amplitude: level,
        breathing_rotation_amplitude: level * 0.3,
        seed,
        ..Default::default()
    };
    let traj: Trajectory = synth_trajectory(&spec).unwrap();
    let sched = ReadoutSchedule::uniform(32, 0.0, 60.0).unwrap();
    lsb8(&corrupt_kspace(&phantom, &traj, &sched).unwrap())
}

pub fn random_input(batch: usize, n: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tensor::zeros([batch, 1, n, n, n]);
    t.data.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    t
}

fn batch_loss(params: &Params, cfg: &NetConfig, x: &Tensor, targets: &[f64], loss: &Loss, key: u64) -> f64 {
    let (out, _) = forward(params, cfg, x, Mode::Train { dropout_key: key }).unwrap();
    loss_and_grad(&out, targets, loss).unwrap().0
}

/// Result of comparing analytic gradients with central differences.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Entries whose analytic gradient is below 1e-8; these must agree in
    /// absolute terms (|fd − analytic| ≤ 1e-9) instead of relatively.
    pub near_zero: usize,
    pub worst_relative: f64,
    pub worst_name: String,
    pub failures: usize,
}

/// Compares every trainable parameter's gradient with a central difference
/// (Richardson-extrapolated: (8[f(h) − f(−h)] − [f(2h) − f(−2h)]) / 12h).
pub fn gradient_check(cfg: &NetConfig, loss: &Loss, x: &Tensor, targets: &[f64], tol: f64) -> GradCheck {
    let params = Params::init(cfg).unwrap();
    let key = 7;
    let (out, cache) = forward(&params, cfg, x, Mode::Train { dropout_key: key }).unwrap();
    let (_, g) = loss_and_grad(&out, targets, loss).unwrap();
    let grads = backward(&params, cfg, &cache, &g).unwrap();

    let mut report = GradCheck::default();
    for (ti, p) in params.tensors.iter().enumerate() {
        if !p.trainable {
            continue;
        }
        // The loss is smooth in the final layer (no ReLU or pooling after it),
        // so a wide step there keeps rounding noise off tiny gradients. Earlier
        // layers sit before piecewise-linear kinks and need a narrow step.
        let h = if p.name.starts_with("out.") { 1e-2 } else { 1e-4 };
        for i in 0..p.len() {
            let analytic = grads.tensors[ti][i];
            let eval = |delta: f64| {
                let mut q = params.clone();
                q.tensors[ti].data[i] += delta;
                batch_loss(&q, cfg, x, targets, loss, key)
            };
            let d1 = eval(h) - eval(-h);
            let d2 = eval(2.0 * h) - eval(-2.0 * h);
            let fd = (8.0 * d1 - d2) / (12.0 * h);
            report.checked += 1;
            if analytic.abs() <= 1e-8 {
                report.near_zero += 1;
                if (fd - analytic).abs() > 1e-9 {
                    report.failures += 1;
                    report.worst_name = format!("{}[{i}] analytic {analytic:e} fd {fd:e}", p.name);
                }
                continue;
            }
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs());
            if rel > report.worst_relative {
                report.worst_relative = rel;
                report.worst_name = format!("{}[{i}] analytic {analytic:e} fd {fd:e}", p.name);
            }
            if rel > tol {
                report.failures += 1;
            }
        }
    }
    report
}
