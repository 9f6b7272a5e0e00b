//! Frequency-band decomposition of head motion into drift, breathing and
//! noisy components.
//!
//! Filters are digital Butterworth cascades applied forward and backward
//! (zero phase). Two decompositions are provided:
//!
//! * [`band_targets`] filters a framewise rate series directly and scores
//!   each band by the mean absolute filtered rate.
//! * [`pose_band_targets`] filters the six pose parameters of a trajectory,
//!   rebuilds one trajectory per band and scores each with the ordinary
//!   framewise motion score. Rates are magnitudes, so a periodic head
//!   movement shows up in a rate series as a rectified wave whose mean lands
//!   in the lowest band; filtering poses keeps each movement in its own band.

mod design;

pub use design::{design_butterworth, Cutoffs, FilterCoefficients, FilterKind, Section};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::rigid_motion::{
    framewise_differences, motion_score, select_window, JenkinsonParams, MotionScore,
    RigidTransform, SequenceWindow, TimedValue, Trajectory,
};

/// Allowed relative deviation of each sampling interval from `1 / sample_rate`.
pub const SAMPLING_JITTER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    pub order: usize,
    pub sample_rate: f64,
}

impl BandSpec {
    pub fn new(low_cut: f64, high_cut: f64, order: usize, sample_rate: f64) -> Result<Self> {
        let spec = Self {
            low_cut,
            high_cut,
            order,
            sample_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 0.1 / 0.5 Hz cutoffs, order 4.
    pub fn with_sample_rate(sample_rate: f64) -> Result<Self> {
        Self::new(0.1, 0.5, 4, sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        let nyq = self.sample_rate / 2.0;
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut && self.high_cut < nyq) {
            return Err(Error::BandSpec(format!(
                "need 0 < low ({}) < high ({}) < fs/2 ({nyq})",
                self.low_cut, self.high_cut
            )));
        }
        if self.order == 0 {
            return Err(Error::BandSpec("order must be positive".into()));
        }
        Ok(())
    }

    pub fn filters(&self) -> Result<[FilterCoefficients; 3]> {
        self.validate()?;
        Ok([
            design_butterworth(
                self.order,
                FilterKind::Lowpass,
                Cutoffs::Single(self.low_cut),
                self.sample_rate,
            )?,
            design_butterworth(
                self.order,
                FilterKind::Bandpass,
                Cutoffs::Band(self.low_cut, self.high_cut),
                self.sample_rate,
            )?,
            design_butterworth(
                self.order,
                FilterKind::Highpass,
                Cutoffs::Single(self.high_cut),
                self.sample_rate,
            )?,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionBands {
    pub drift: MotionScore,
    pub breathing: MotionScore,
    pub noisy: MotionScore,
}

impl MotionBands {
    pub fn as_array(&self) -> [f64; 3] {
        [
            self.drift.value(),
            self.breathing.value(),
            self.noisy.value(),
        ]
    }
}

/// Number of samples reflected at each end before filtering.
pub fn pad_length(coeffs: &FilterCoefficients) -> usize {
    3 * coeffs.order()
}

/// Steady-state section states for a unit constant input.
fn steady_state(sections: &[Section]) -> Vec<[f64; 2]> {
    let mut level = 1.0;
    sections
        .iter()
        .map(|s| {
            let g = s.dc_gain();
            let zi = [(g - s.b0) * level, (s.b2 - s.a2 * g) * level];
            level *= g;
            zi
        })
        .collect()
}

fn run_cascade(data: &mut [f64], sections: &[Section], zi: &[[f64; 2]], x0: f64) {
    for (s, z) in sections.iter().zip(zi) {
        let (mut z1, mut z2) = (z[0] * x0, z[1] * x0);
        for v in data.iter_mut() {
            let x = *v;
            let y = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * y + z2;
            z2 = s.b2 * x - s.a2 * y;
            *v = y;
        }
    }
}

fn forward_backward(series: &[f64], coeffs: &FilterCoefficients, pad: usize) -> Vec<f64> {
    let n = series.len();
    let (first, last) = (series[0], series[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - series[i]));
    ext.extend_from_slice(series);
    ext.extend((1..=pad).map(|i| 2.0 * last - series[n - 1 - i]));

    let zi = steady_state(coeffs.sections());
    let x0 = ext[0];
    run_cascade(&mut ext, coeffs.sections(), &zi, x0);
    ext.reverse();
    let x0 = ext[0];
    run_cascade(&mut ext, coeffs.sections(), &zi, x0);
    ext.reverse();
    ext.truncate(pad + n);
    ext.drain(..pad);
    ext
}

/// Forward–backward filtering with odd reflection padding and steady-state
/// initial conditions. Output has the input's length and no phase lag.
///
/// The forward-first and backward-first passes differ only in their edge
/// transients; averaging them makes the result exactly reversal-symmetric.
pub fn zero_phase_filter(series: &[f64], coeffs: &FilterCoefficients) -> Result<Vec<f64>> {
    let pad = pad_length(coeffs);
    let n = series.len();
    if n <= pad {
        return Err(Error::InsufficientLength { len: n, pad });
    }
    let fwd = forward_backward(series, coeffs, pad);
    let mut rev = series.to_vec();
    rev.reverse();
    let mut bwd = forward_backward(&rev, coeffs, pad);
    bwd.reverse();
    Ok(fwd.iter().zip(&bwd).map(|(a, b)| 0.5 * (a + b)).collect())
}

fn check_uniform(times: &[f64], sample_rate: f64) -> Result<()> {
    let expected = 1.0 / sample_rate;
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if (dt - expected).abs() > SAMPLING_JITTER * expected {
            return Err(Error::IrregularSampling {
                index: i + 1,
                dt,
                expected,
            });
        }
    }
    Ok(())
}

fn mean_abs_in_window(times: &[f64], values: &[f64], window: &SequenceWindow) -> Result<MotionScore> {
    let series: Vec<TimedValue> = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| TimedValue::new(t, v.abs()))
        .collect();
    motion_score(&select_window(&series, window))
}

/// Band scores from a framewise rate series: lowpass → drift, bandpass →
/// breathing, highpass → noisy; each filtered series is windowed and scored
/// by its mean absolute value.
pub fn band_targets(
    series: &[TimedValue],
    spec: &BandSpec,
    window: &SequenceWindow,
) -> Result<MotionBands> {
    let times: Vec<f64> = series.iter().map(|s| s.time).collect();
    check_uniform(&times, spec.sample_rate)?;
    let values: Vec<f64> = series.iter().map(|s| s.value).collect();
    let [lp, bp, hp] = spec.filters()?;
    let score = |c: &FilterCoefficients| -> Result<MotionScore> {
        mean_abs_in_window(&times, &zero_phase_filter(&values, c)?, window)
    };
    Ok(MotionBands {
        drift: score(&lp)?,
        breathing: score(&bp)?,
        noisy: score(&hp)?,
    })
}

/// Six pose parameters per frame: translation (mm) and rotation vector (rad).
fn pose_parameters(traj: &Trajectory) -> [Vec<f64>; 6] {
    let mut params: [Vec<f64>; 6] = Default::default();
    for (_, pose) in traj.samples() {
        let t = pose.translation();
        let r = pose.rotation_vector();
        for (k, v) in [t.x, t.y, t.z, r.x, r.y, r.z].into_iter().enumerate() {
            params[k].push(v);
        }
    }
    params
}

fn rebuild(times: &[f64], params: &[Vec<f64>; 6]) -> Result<Trajectory> {
    let samples = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let pose = RigidTransform::from_rotation_vector(
                Vector3::new(params[3][i], params[4][i], params[5][i]),
                Vector3::new(params[0][i], params[1][i], params[2][i]),
            );
            (t, pose)
        })
        .collect();
    Trajectory::new(samples)
}

/// Splits a trajectory into drift / breathing / noisy trajectories by
/// zero-phase filtering each pose parameter.
pub fn split_trajectory(traj: &Trajectory, spec: &BandSpec) -> Result<[Trajectory; 3]> {
    let times: Vec<f64> = traj.times().collect();
    check_uniform(&times, spec.sample_rate)?;
    let params = pose_parameters(traj);
    let filters = spec.filters()?;
    let mut out = Vec::with_capacity(3);
    for f in &filters {
        let mut filtered: [Vec<f64>; 6] = Default::default();
        for (dst, src) in filtered.iter_mut().zip(&params) {
            *dst = zero_phase_filter(src, f)?;
        }
        out.push(rebuild(&times, &filtered)?);
    }
    let [a, b, c]: [Trajectory; 3] = out.try_into().expect("three bands");
    Ok([a, b, c])
}

/// Band scores from a trajectory: each band trajectory is differenced
/// framewise, windowed and averaged like the overall motion score.
pub fn pose_band_targets(
    traj: &Trajectory,
    spec: &BandSpec,
    window: &SequenceWindow,
    params: &JenkinsonParams,
) -> Result<MotionBands> {
    let [drift, breathing, noisy] = split_trajectory(traj, spec)?;
    let score = |t: &Trajectory| -> Result<MotionScore> {
        motion_score(&select_window(&framewise_differences(t, params)?, window))
    };
    Ok(MotionBands {
        drift: score(&drift)?,
        breathing: score(&breathing)?,
        noisy: score(&noisy)?,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    const FS: f64 = 30.0;

    fn sine(freq: f64, secs: f64) -> Vec<f64> {
        let n = (secs * FS) as usize;
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
    }

    fn timed(values: &[f64]) -> Vec<TimedValue> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| TimedValue::new(i as f64 / FS, v))
            .collect()
    }

    fn filters() -> [FilterCoefficients; 3] {
        BandSpec::with_sample_rate(FS).unwrap().filters().unwrap()
    }

    #[test]
    fn constant_through_lowpass_is_preserved() {
        let [lp, _, hp] = filters();
        let x = vec![0.7; 500];
        let y = zero_phase_filter(&x, &lp).unwrap();
        assert!(y.iter().all(|v| (v - 0.7).abs() < 1e-9));
        let y = zero_phase_filter(&x, &hp).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn length_is_preserved_and_short_input_rejected() {
        let [lp, bp, _] = filters();
        assert_eq!(zero_phase_filter(&sine(1.0, 10.0), &lp).unwrap().len(), 300);
        assert_eq!(pad_length(&bp), 24);
        assert!(matches!(
            zero_phase_filter(&[1.0; 24], &bp),
            Err(Error::InsufficientLength { len: 24, pad: 24 })
        ));
        assert!(zero_phase_filter(&[1.0; 25], &bp).is_ok());
    }

    #[test]
    fn reversal_symmetry() {
        let [lp, bp, hp] = filters();
        let x: Vec<f64> = (0..900)
            .map(|i| {
                let t = i as f64 / FS;
                (0.3 * t).sin() + 0.2 * (2.0 * PI * 2.0 * t).cos() + 0.001 * t * t
            })
            .collect();
        let mut rev = x.clone();
        rev.reverse();
        for f in [&lp, &bp, &hp] {
            let y = zero_phase_filter(&x, f).unwrap();
            let mut yr = zero_phase_filter(&rev, f).unwrap();
            yr.reverse();
            for (a, b) in y.iter().zip(&yr) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linearity() {
        let [lp, bp, hp] = filters();
        let x = sine(0.25, 40.0);
        let y: Vec<f64> = (0..x.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let (alpha, beta) = (1.7, -0.4);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        for f in [&lp, &bp, &hp] {
            let fx = zero_phase_filter(&x, f).unwrap();
            let fy = zero_phase_filter(&y, f).unwrap();
            let fm = zero_phase_filter(&mix, f).unwrap();
            for i in 0..x.len() {
                assert!((fm[i] - (alpha * fx[i] + beta * fy[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rate_series_band_separation() {
        let spec = BandSpec::with_sample_rate(FS).unwrap();
        let n = (200.0 * FS) as usize;
        let window = SequenceWindow::new(40.0, 160.0, 0.0).unwrap();

        let constant = timed(&vec![0.4; n]);
        let bands = band_targets(&constant, &spec, &window).unwrap();
        assert!((bands.drift.value() - 0.4).abs() <= 0.05 * 0.4);
        assert!(bands.breathing.value() <= 0.05 * 0.4);
        assert!(bands.noisy.value() <= 0.05 * 0.4);

        for (freq, which) in [(0.25, 1usize), (2.0, 2usize)] {
            let series = timed(&sine(freq, 200.0));
            let unfiltered = motion_score(
                &select_window(&series, &window)
                    .into_iter()
                    .map(|s| TimedValue::new(s.time, s.value.abs()))
                    .collect::<Vec<_>>(),
            )
            .unwrap()
            .value();
            let b = band_targets(&series, &spec, &window).unwrap().as_array();
            for (k, v) in b.iter().enumerate() {
                if k == which {
                    assert!(*v >= 0.85 * unfiltered, "band {k}: {v} vs {unfiltered}");
                } else {
                    assert!(*v <= 0.15 * unfiltered, "band {k}: {v} vs {unfiltered}");
                }
            }
        }
    }

    #[test]
    fn irregular_sampling_rejected() {
        let spec = BandSpec::with_sample_rate(FS).unwrap();
        let mut series = timed(&vec![1.0; 300]);
        series[100].time += 0.1 / FS;
        let w = SequenceWindow::new(0.0, 10.0, 0.0).unwrap();
        assert!(matches!(
            band_targets(&series, &spec, &w),
            Err(Error::IrregularSampling { index: 100, .. })
        ));
    }

    #[test]
    fn band_spec_validation() {
        assert!(BandSpec::new(0.5, 0.1, 4, FS).is_err());
        assert!(BandSpec::new(0.1, 15.0, 4, FS).is_err());
        assert!(BandSpec::new(0.0, 0.5, 4, FS).is_err());
        assert!(BandSpec::new(0.1, 0.5, 0, FS).is_err());
    }

    #[test]
    fn pose_bands_of_pure_drift() {
        let spec = BandSpec::with_sample_rate(FS).unwrap();
        let traj = Trajectory::new(
            (0..(120.0 * FS) as usize)
                .map(|i| {
                    let t = i as f64 / FS;
                    (t, RigidTransform::from_translation(0.02 * t, 0.0, 0.0))
                })
                .collect(),
        )
        .unwrap();
        let w = SequenceWindow::new(20.0, 100.0, 0.0).unwrap();
        let b = pose_band_targets(&traj, &spec, &w, &JenkinsonParams::default()).unwrap();
        assert!((b.drift.value() - 0.02).abs() < 1e-6);
        assert!(b.breathing.value() < 1e-4);
        assert!(b.noisy.value() < 1e-4);
    }
}
