//! Average edge strength, a reference-free sharpness measure: motion blur
//! and ghosting lower it.

use headmotion::metrics::aes;
use headmotion::simulate::{corrupt_kspace, make_phantom, synth_trajectory, ReadoutSchedule, TrajectorySpec};
use headmotion::volume_io::read_nifti;

fn main() -> headmotion::Result<()> {
    if let Some(path) = std::env::args().nth(1) {
        println!("{path}: AES {:.4}", aes(&read_nifti(&path)?)?);
        return Ok(());
    }
    let clean = make_phantom([32; 3], [4.0; 3], 1)?;
    println!("clean phantom: AES {:.4}", aes(&clean)?);
    let schedule = ReadoutSchedule::uniform(32, 0.0, 60.0)?;
    for level in [0.5, 1.0, 2.0, 4.0] {
        let spec = TrajectorySpec {
            breathing_amplitude: level,
            breathing_rotation_amplitude: 0.3 * level,
            jitter_sd: 0.05 * level,
            seed: 1,
            ..Default::default()
        };
        let moved = corrupt_kspace(&clean, &synth_trajectory(&spec)?, &schedule)?;
        println!("breathing {level:.1} mm: AES {:.4}", aes(&moved)?);
    }
    Ok(())
}
