//! Rigid head poses and the motion score derived from them.
//!
//! A pose is a 4×4 homogeneous transform (rotation in direction cosines,
//! translation in mm). Two poses are compared with Jenkinson's RMS
//! displacement over a spherical head model:
//!
//! ```text
//! M = b·a⁻¹ − I = [A | t]
//! d = sqrt( R²/5 · tr(AᵀA) + |t + A·c|² )
//! ```
//!
//! Consecutive frames of a tracking log give a rate series in mm/s; the
//! motion score of a sequence is the mean rate inside its acquisition window.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Tolerance on orthonormality and unit determinant of the rotation block.
pub const RIGIDITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    matrix: Matrix4<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
        }
    }

    /// Validates a homogeneous matrix. Non-rigid input is rejected, never re-orthogonalized.
    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let last = matrix.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::InvalidTransform(format!(
                "last row is ({}, {}, {}, {}), expected (0, 0, 0, 1)",
                last[0], last[1], last[2], last[3]
            )));
        }
        let r: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let gram = r.transpose() * r - Matrix3::identity();
        let off = gram.abs().max();
        if off > RIGIDITY_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation block not orthonormal (max |RᵀR − I| = {off:.3e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > RIGIDITY_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det:.6}, expected +1"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn from_parts(rotation: &Rotation3<f64>, translation: Vector3<f64>) -> Self {
        let mut matrix = Matrix4::identity();
        matrix
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(rotation.matrix());
        matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self { matrix }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::from_parts(&Rotation3::identity(), Vector3::new(x, y, z))
    }

    /// Pose from a rotation vector (axis × angle in radians) and a translation in mm.
    pub fn from_rotation_vector(rotvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::from_parts(&Rotation3::from_scaled_axis(rotvec), translation)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Rotation vector (axis × angle, radians) of the rotation block.
    pub fn rotation_vector(&self) -> Vector3<f64> {
        Rotation3::from_matrix_unchecked(self.rotation()).scaled_axis()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        let mut matrix = Matrix4::identity();
        matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Self { matrix }
    }

    /// Maps a point given in mm.
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        RigidTransform {
            matrix: self.matrix * rhs.matrix,
        }
    }
}

impl Mul for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        RigidTransform {
            matrix: self.matrix * rhs.matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, RigidTransform)>,
}

impl Trajectory {
    /// Timestamps must be finite and strictly increasing.
    pub fn new(samples: Vec<(f64, RigidTransform)>) -> Result<Self> {
        for (i, pair) in samples.windows(2).enumerate() {
            let dt = pair[1].0 - pair[0].0;
            if !(dt > 0.0) {
                return Err(Error::DegenerateInterval {
                    index: i,
                    next: i + 1,
                    dt,
                });
            }
        }
        if let Some((t, _)) = samples.iter().find(|(t, _)| !t.is_finite()) {
            return Err(Error::NonFinite(format!("timestamp {t}")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, RigidTransform)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(t, _)| *t)
    }

    pub fn start(&self) -> Option<f64> {
        self.samples.first().map(|s| s.0)
    }

    pub fn end(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }

    /// Pose at time `t`: the latest sample at or before `t` (clamped to the ends).
    pub fn pose_at(&self, t: f64) -> Option<&RigidTransform> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self.samples.partition_point(|(ts, _)| *ts <= t);
        Some(&self.samples[idx.saturating_sub(1)].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JenkinsonParams {
    pub sphere_radius: f64,
    pub sphere_center: Vector3<f64>,
}

impl Default for JenkinsonParams {
    fn default() -> Self {
        Self {
            sphere_radius: 80.0,
            sphere_center: Vector3::zeros(),
        }
    }
}

impl JenkinsonParams {
    pub fn with_radius(sphere_radius: f64) -> Self {
        Self {
            sphere_radius,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sphere_radius > 0.0) || !self.sphere_radius.is_finite() {
            return Err(Error::Config(format!(
                "sphere radius must be positive, got {}",
                self.sphere_radius
            )));
        }
        Ok(())
    }
}

/// Acquisition window in scanner time. `clock_offset` is camera clock minus scanner clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceWindow {
    pub start: f64,
    pub end: f64,
    pub clock_offset: f64,
}

impl SequenceWindow {
    pub fn new(start: f64, end: f64, clock_offset: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::Config(format!(
                "window end {end} must be after start {start}"
            )));
        }
        Ok(Self {
            start,
            end,
            clock_offset,
        })
    }

    /// Whether a camera-clock timestamp lies inside the window.
    pub fn contains(&self, camera_time: f64) -> bool {
        let t = camera_time - self.clock_offset;
        t >= self.start && t <= self.end
    }

    /// Window bounds converted to the camera clock.
    pub fn camera_span(&self) -> (f64, f64) {
        (self.start + self.clock_offset, self.end + self.clock_offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MotionScore(f64);

impl MotionScore {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NonFinite(format!("motion score {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for MotionScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One sample of a timestamped series (camera clock, seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedValue {
    pub time: f64,
    pub value: f64,
}

impl TimedValue {
    pub fn new(time: f64, value: f64) -> Self {
        Self { time, value }
    }
}

/// Jenkinson's RMS displacement (mm) between two poses.
pub fn jenkinson_difference(
    a: &RigidTransform,
    b: &RigidTransform,
    params: &JenkinsonParams,
) -> Result<f64> {
    params.validate()?;
    // The constructors guarantee rigidity except through `Mul`; re-check cheaply.
    RigidTransform::from_matrix(*a.matrix())?;
    RigidTransform::from_matrix(*b.matrix())?;
    Ok(jenkinson_unchecked(a, b, params))
}

fn jenkinson_unchecked(a: &RigidTransform, b: &RigidTransform, params: &JenkinsonParams) -> f64 {
    if a.matrix == b.matrix {
        return 0.0;
    }
    let rel = b.matrix() * a.inverse().matrix() - Matrix4::identity();
    let a_block: Matrix3<f64> = rel.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vector3<f64> = rel.fixed_view::<3, 1>(0, 3).into_owned();
    let r = params.sphere_radius;
    let trace = (a_block.transpose() * a_block).trace();
    let shift = t + a_block * params.sphere_center;
    let d2 = r * r / 5.0 * trace + shift.norm_squared();
    d2.max(0.0).sqrt()
}

/// Rate (mm/s) between each pair of consecutive frames, stamped at the later frame.
pub fn framewise_differences(
    traj: &Trajectory,
    params: &JenkinsonParams,
) -> Result<Vec<TimedValue>> {
    params.validate()?;
    let samples = traj.samples();
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    samples
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (t0, ref a) = pair[0];
            let (t1, ref b) = pair[1];
            let dt = t1 - t0;
            if !(dt > 0.0) {
                return Err(Error::DegenerateInterval {
                    index: i,
                    next: i + 1,
                    dt,
                });
            }
            Ok(TimedValue::new(t1, jenkinson_unchecked(a, b, params) / dt))
        })
        .collect()
}

/// Samples whose scanner-clock time falls in `[start, end]`, order preserved.
pub fn select_window(series: &[TimedValue], window: &SequenceWindow) -> Vec<TimedValue> {
    series
        .iter()
        .copied()
        .filter(|s| window.contains(s.time))
        .collect()
}

/// Arithmetic mean of the rates.
pub fn motion_score(series: &[TimedValue]) -> Result<MotionScore> {
    if series.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let sum: f64 = series.iter().map(|s| s.value).sum();
    MotionScore::new(sum / series.len() as f64)
}

/// Framewise differencing, windowing and averaging in one call.
pub fn sequence_score(
    traj: &Trajectory,
    window: Option<&SequenceWindow>,
    params: &JenkinsonParams,
) -> Result<MotionScore> {
    let rates = framewise_differences(traj, params)?;
    match window {
        Some(w) => motion_score(&select_window(&rates, w)),
        None => motion_score(&rates),
    }
}
