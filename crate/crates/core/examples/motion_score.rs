//! Motion score of a tracking log: framewise Jenkinson rates, windowed to the
//! acquisition and averaged.
//!
//! ```text
//! cargo run --example motion_score [-- path/to/log.csv START END OFFSET]
//! ```
//! Without arguments a breathing-plus-drift log is synthesized first.

use std::path::PathBuf;

use headmotion::rigid_motion::{
    framewise_differences, jenkinson_difference, motion_score, select_window, JenkinsonParams, RigidTransform,
    SequenceWindow,
};
use headmotion::simulate::{synth_trajectory, TrajectorySpec};
use headmotion::volume_io::{read_tracking_log, write_tracking_log};
use nalgebra::Vector3;

fn main() -> headmotion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = tempfile::tempdir().expect("temporary directory");
    let (log, window) = if let [path, start, end, offset] = args.as_slice() {
        let parse = |s: &str| s.parse::<f64>().expect("numeric window argument");
        (PathBuf::from(path), SequenceWindow::new(parse(start), parse(end), parse(offset))?)
    } else {
        let spec = TrajectorySpec {
            duration: 120.0,
            drift_rate: [0.01, 0.0, 0.0],
            breathing_amplitude: 0.5,
            jitter_sd: 0.02,
            seed: 3,
            ..Default::default()
        };
        let path = dir.path().join("log.csv");
        write_tracking_log(&synth_trajectory(&spec)?, &path)?;
        // camera clock runs 5 s ahead of the scanner
        (path, SequenceWindow::new(25.0, 95.0, 5.0)?)
    };

    let params = JenkinsonParams::default();
    let one_degree = RigidTransform::from_rotation_vector(Vector3::new(0.0, 0.0, 1f64.to_radians()), Vector3::zeros());
    println!(
        "1° about z at R = 80 mm: {:.4} mm",
        jenkinson_difference(&RigidTransform::identity(), &one_degree, &params)?
    );

    let traj = read_tracking_log(&log)?;
    let rates = framewise_differences(&traj, &params)?;
    let inside = select_window(&rates, &window);
    let score = motion_score(&inside)?;
    println!("{} poses, {} rates inside the window", traj.len(), inside.len());
    println!("motion score: {:.4} mm/s", score.value());
    Ok(())
}
