use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rigid_motion::{RigidTransform, Trajectory};

/// Parameters of a synthetic head-motion trace. Translations in mm,
/// rotations in degrees; breathing moves along `breathing_axis` and nods
/// about `breathing_rotation_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub start: f64,
    pub duration: f64,
    pub rate: f64,
    pub drift_rate: [f64; 3],
    pub breathing_amplitude: f64,
    pub breathing_frequency: f64,
    pub breathing_axis: [f64; 3],
    pub breathing_phase: f64,
    pub jitter_sd: f64,
    pub rotation_drift_rate: [f64; 3],
    pub breathing_rotation_amplitude: f64,
    pub breathing_rotation_axis: [f64; 3],
    pub jitter_rotation_sd: f64,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    /// One minute at 30 Hz with no motion at all.
    fn default() -> Self {
        Self {
            start: 0.0,
            duration: 60.0,
            rate: 30.0,
            drift_rate: [0.0; 3],
            breathing_amplitude: 0.0,
            breathing_frequency: 0.25,
            breathing_axis: [0.0, 0.0, 1.0],
            breathing_phase: 0.0,
            jitter_sd: 0.0,
            rotation_drift_rate: [0.0; 3],
            breathing_rotation_amplitude: 0.0,
            breathing_rotation_axis: [1.0, 0.0, 0.0],
            jitter_rotation_sd: 0.0,
            seed: 0,
        }
    }
}

fn unit(v: [f64; 3], what: &str) -> Result<Vector3<f64>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Config(format!("{what} must be a nonzero finite vector")));
    }
    Ok(v / n)
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.rate > 0.0) {
            return Err(Error::Config("duration and rate must be positive".into()));
        }
        if !(0.1..=0.5).contains(&self.breathing_frequency) {
            return Err(Error::Config(format!(
                "breathing frequency {} Hz outside [0.1, 0.5]",
                self.breathing_frequency
            )));
        }
        if !(self.rate > 2.0 * self.breathing_frequency) {
            return Err(Error::Config("sampling rate must exceed twice the breathing frequency".into()));
        }
        if self.jitter_sd < 0.0 || self.jitter_rotation_sd < 0.0 {
            return Err(Error::Config("jitter standard deviations must be non-negative".into()));
        }
        unit(self.breathing_axis, "breathing axis")?;
        unit(self.breathing_rotation_axis, "breathing rotation axis")?;
        Ok(())
    }

    /// Every amplitude multiplied by `level` (frequencies and axes kept).
    pub fn scaled(&self, level: f64) -> Self {
        Self {
            drift_rate: self.drift_rate.map(|v| v * level),
            breathing_amplitude: self.breathing_amplitude * level,
            jitter_sd: self.jitter_sd * level,
            rotation_drift_rate: self.rotation_drift_rate.map(|v| v * level),
            breathing_rotation_amplitude: self.breathing_rotation_amplitude * level,
            jitter_rotation_sd: self.jitter_rotation_sd * level,
            ..self.clone()
        }
    }
}

/// Samples the pose at `start + i / rate` for every whole sample in the
/// duration (inclusive of both ends).
pub fn synth_trajectory(spec: &TrajectorySpec) -> Result<Trajectory> {
    spec.validate()?;
    let n = (spec.duration * spec.rate).round() as usize + 1;
    let axis = unit(spec.breathing_axis, "breathing axis")?;
    let rot_axis = unit(spec.breathing_rotation_axis, "breathing rotation axis")?;
    let drift = Vector3::from(spec.drift_rate);
    let rot_drift = Vector3::from(spec.rotation_drift_rate).map(f64::to_radians);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.jitter_sd).expect("non-negative sd");
    let jitter_rot = Normal::new(0.0, spec.jitter_rotation_sd.to_radians()).expect("non-negative sd");
    let omega = std::f64::consts::TAU * spec.breathing_frequency;

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let dt = i as f64 / spec.rate;
        let wave = (omega * dt + spec.breathing_phase).sin();
        let mut t = drift * dt + axis * (spec.breathing_amplitude * wave);
        let mut r = rot_drift * dt + rot_axis * (spec.breathing_rotation_amplitude.to_radians() * wave);
        if spec.jitter_sd > 0.0 {
            t += Vector3::from_fn(|_, _| jitter.sample(&mut rng));
        }
        if spec.jitter_rotation_sd > 0.0 {
            r += Vector3::from_fn(|_, _| jitter_rot.sample(&mut rng));
        }
        samples.push((spec.start + dt, RigidTransform::from_rotation_vector(r, t)));
    }
    Trajectory::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_motion::{sequence_score, JenkinsonParams};

    #[test]
    fn no_motion_scores_zero() {
        let tr = synth_trajectory(&TrajectorySpec::default()).unwrap();
        assert_eq!(tr.len(), 1801);
        let s = sequence_score(&tr, None, &JenkinsonParams::default()).unwrap();
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn pure_drift_scores_its_speed() {
        let spec = TrajectorySpec {
            drift_rate: [0.02, 0.0, 0.0],
            ..Default::default()
        };
        let tr = synth_trajectory(&spec).unwrap();
        let s = sequence_score(&tr, None, &JenkinsonParams::default()).unwrap();
        assert!((s.value() - 0.02).abs() < 1e-6);
    }

    #[test]
    fn breathing_score_is_four_amplitude_frequency() {
        // mean |d/dt A sin(2πft)| = 4Af over whole cycles
        let spec = TrajectorySpec {
            breathing_amplitude: 1.0,
            breathing_frequency: 0.25,
            ..Default::default()
        };
        let tr = synth_trajectory(&spec).unwrap();
        let s = sequence_score(&tr, None, &JenkinsonParams::default()).unwrap();
        assert!((s.value() - 1.0).abs() < 2e-3, "{}", s.value());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            TrajectorySpec { duration: 0.0, ..Default::default() },
            TrajectorySpec { breathing_frequency: 0.6, ..Default::default() },
            TrajectorySpec { breathing_axis: [0.0; 3], ..Default::default() },
        ] {
            assert!(synth_trajectory(&spec).is_err());
        }
    }
}
