use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::volume_io::{Modality, Volume};

struct Ellipsoid {
    center: [f64; 3],
    radii: [f64; 3],
}

impl Ellipsoid {
    /// Squared normalized radius of a point given in unit-cube coordinates.
    fn rho2(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|k| ((p[k] - self.center[k]) / self.radii[k]).powi(2))
            .sum()
    }
}

/// Head-like phantom: scalp, skull, grey and white matter, and ventricles as
/// nested ellipsoids, modulated by smooth texture and Gaussian noise inside
/// the head. Background is exactly zero.
pub fn make_phantom(dims: [usize; 3], voxel_size: [f64; 3], seed: u64) -> Result<Volume> {
    if dims.iter().any(|&n| n < 16) {
        return Err(Error::InvalidVolume(format!(
            "phantom needs at least 16 voxels per axis, got {dims:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng, x: f64, rel: f64| x * (1.0 + rng.random_range(-rel..rel));
    let c = [
        rng.random_range(-0.02..0.02),
        rng.random_range(-0.02..0.02),
        rng.random_range(-0.02..0.02),
    ];
    let head = Ellipsoid {
        center: c,
        radii: [jitter(&mut rng, 0.40, 0.05), jitter(&mut rng, 0.45, 0.05), jitter(&mut rng, 0.40, 0.05)],
    };
    let scaled = |f: f64| Ellipsoid {
        center: c,
        radii: head.radii.map(|r| r * f),
    };
    let skull = scaled(0.90);
    let brain = scaled(0.80);
    let white = scaled(jitter(&mut rng, 0.55, 0.08));
    let ventricles = [
        Ellipsoid {
            center: [c[0] - 0.05, c[1], c[2] + 0.03],
            radii: [0.04, jitter(&mut rng, 0.12, 0.2), 0.06],
        },
        Ellipsoid {
            center: [c[0] + 0.05, c[1], c[2] + 0.03],
            radii: [0.04, jitter(&mut rng, 0.12, 0.2), 0.06],
        },
    ];
    let levels = [
        jitter(&mut rng, 900.0, 0.1),  // scalp
        jitter(&mut rng, 250.0, 0.1),  // skull
        jitter(&mut rng, 1100.0, 0.1), // grey matter
        jitter(&mut rng, 1500.0, 0.1), // white matter
        jitter(&mut rng, 450.0, 0.1),  // ventricles
    ];
    let waves: Vec<([f64; 3], f64)> = (0..4)
        .map(|_| {
            let k = [0, 1, 2].map(|_| rng.random_range(0.5..2.5) * std::f64::consts::TAU);
            (k, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let noise = Normal::new(0.0, 12.0).expect("positive sd");

    let [nx, ny, nz] = dims;
    let mut data = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [
                    (x as f64 + 0.5) / nx as f64 - 0.5,
                    (y as f64 + 0.5) / ny as f64 - 0.5,
                    (z as f64 + 0.5) / nz as f64 - 0.5,
                ];
                if head.rho2(p) > 1.0 {
                    data.push(0);
                    continue;
                }
                let base = if ventricles.iter().any(|e| e.rho2(p) <= 1.0) {
                    levels[4]
                } else if white.rho2(p) <= 1.0 {
                    levels[3]
                } else if brain.rho2(p) <= 1.0 {
                    levels[2]
                } else if skull.rho2(p) <= 1.0 {
                    levels[1]
                } else {
                    levels[0]
                };
                let texture: f64 = waves
                    .iter()
                    .map(|(k, phase)| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin())
                    .sum::<f64>()
                    * 0.03;
                let value = base * (1.0 + texture) + noise.sample(&mut rng);
                data.push(value.round().clamp(1.0, 65535.0) as u16);
            }
        }
    }
    Volume::new(dims, voxel_size, data, Modality::Synthetic)
}

/// Nonzero voxels of a phantom as a 0/1 head mask.
pub fn head_mask(phantom: &Volume) -> Volume {
    phantom.map(|x| u16::from(x > 0))
}
