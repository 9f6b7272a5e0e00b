//! Intensity preprocessing variants and training-time augmentation, on a
//! phantom whose motion ghosts leak into the background.

use headmotion::preprocess::{augment, AugmentConfig, Preprocess};
use headmotion::simulate::{corrupt_kspace, head_mask, make_phantom, synth_trajectory, ReadoutSchedule, TrajectorySpec};
use headmotion::volume_io::Volume;

fn summary(name: &str, v: &Volume) {
    let n = v.len() as f64;
    let mean = v.data().iter().map(|&x| x as f64).sum::<f64>() / n;
    let max = v.data().iter().copied().max().unwrap_or(0);
    let zeros = v.data().iter().filter(|&&x| x == 0).count();
    println!("{name:>10}: mean {mean:8.2}  max {max:5}  zero voxels {zeros}");
}

fn main() -> headmotion::Result<()> {
    let clean = make_phantom([32; 3], [4.0; 3], 5)?;
    let mask = head_mask(&clean);
    let motion = TrajectorySpec {
        breathing_amplitude: 2.0,
        breathing_rotation_amplitude: 0.5,
        seed: 5,
        ..Default::default()
    };
    let v = corrupt_kspace(&clean, &synth_trajectory(&motion)?, &ReadoutSchedule::uniform(32, 0.0, 60.0)?)?;
    summary("raw", &v);
    for p in [Preprocess::None, Preprocess::Lsb8, Preprocess::Robust, Preprocess::Background] {
        let out = p.apply(&v, p.needs_mask().then_some(&mask))?;
        summary(p.as_str(), &out);
    }

    let cfg = AugmentConfig {
        seed: 9,
        ..Default::default()
    };
    let prepared = Preprocess::Lsb8.apply(&v, None)?;
    for draw in 0..3 {
        summary(&format!("aug #{draw}"), &augment(&prepared, &cfg, draw));
    }
    Ok(())
}
