use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rigid_motion::{RigidTransform, Trajectory};
use crate::volume_io::Volume;

/// Segmented acquisition along one phase-encode axis: segment `s` acquires
/// a contiguous block of k-space lines (in centered order, low to high
/// frequency) at `times[s]` on the trajectory's clock.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSchedule {
    pub axis: usize,
    pub times: Vec<f64>,
}

impl ReadoutSchedule {
    /// `segments` equally spaced acquisition times at the segment midpoints
    /// of `[start, end]`, phase-encoded along y.
    pub fn uniform(segments: usize, start: f64, end: f64) -> Result<Self> {
        if segments == 0 || !(end > start) {
            return Err(Error::Config(format!(
                "schedule needs at least one segment and end > start, got {segments} over [{start}, {end}]"
            )));
        }
        let step = (end - start) / segments as f64;
        Ok(Self {
            axis: 1,
            times: (0..segments).map(|s| start + (s as f64 + 0.5) * step).collect(),
        })
    }

    pub fn segments(&self) -> usize {
        self.times.len()
    }

    /// Segment acquiring centered line `row` of `n`.
    pub fn segment_of(&self, row: usize, n: usize) -> usize {
        row * self.segments() / n
    }
}

/// In-place 3-D FFT over an x-fastest `[nx, ny, nz]` grid.
fn fft3(data: &mut [Complex64], [nx, ny, nz]: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = |n: usize, p: &mut FftPlanner<f64>| {
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    };
    let fx = plan(nx, &mut planner);
    for row in data.chunks_exact_mut(nx) {
        fx.process(row);
    }
    let fy = plan(ny, &mut planner);
    let mut buf = vec![Complex64::default(); ny.max(nz)];
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                buf[y] = data[(z * ny + y) * nx + x];
            }
            fy.process(&mut buf[..ny]);
            for y in 0..ny {
                data[(z * ny + y) * nx + x] = buf[y];
            }
        }
    }
    let fz = plan(nz, &mut planner);
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                buf[z] = data[(z * ny + y) * nx + x];
            }
            fz.process(&mut buf[..nz]);
            for z in 0..nz {
                data[(z * ny + y) * nx + x] = buf[z];
            }
        }
    }
    if inverse {
        let scale = 1.0 / (nx * ny * nz) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Signed frequency index of FFT bin `i` of `n`.
fn signed(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Spectrum of a volume with its origin moved to voxel `n / 2` on each axis,
/// so that rotations turn about the volume center.
struct CenteredSpectrum {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl CenteredSpectrum {
    fn new(v: &Volume) -> Self {
        let dims = v.dims();
        let mut data: Vec<Complex64> = v.data().iter().map(|&x| Complex64::new(x as f64, 0.0)).collect();
        fft3(&mut data, dims, false);
        let [nx, ny, nz] = dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let m = [signed(x, nx), signed(y, ny), signed(z, nz)];
                    let phase: f64 = (0..3)
                        .map(|k| TAU * (m[k] * (dims[k] / 2) as i64) as f64 / dims[k] as f64)
                        .sum();
                    data[(z * ny + y) * nx + x] *= Complex64::from_polar(1.0, phase);
                }
            }
        }
        Self { dims, data }
    }

    /// Value at integer signed frequencies; zero beyond the sampled band.
    fn at(&self, m: [i64; 3]) -> Complex64 {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let n = self.dims[k] as i64;
            let lo = -(n / 2);
            let hi = (n - 1) / 2;
            if m[k] < lo || m[k] > hi {
                return Complex64::default();
            }
            idx[k] = m[k].rem_euclid(n) as usize;
        }
        self.data[(idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]]
    }

    /// Trilinear interpolation at fractional signed frequencies.
    fn sample(&self, f: [f64; 3]) -> Complex64 {
        let base = f.map(|v| v.floor());
        let frac = [f[0] - base[0], f[1] - base[1], f[2] - base[2]];
        let b = base.map(|v| v as i64);
        let mut acc = Complex64::default();
        for corner in 0..8 {
            let mut w = 1.0;
            let mut m = b;
            for k in 0..3 {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    m[k] += 1;
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += self.at(m) * w;
            }
        }
        acc
    }
}

/// Simulates a segmented acquisition of `v` while the head follows `traj`.
/// Each segment's k-space lines are taken from the volume posed at that
/// segment's time: translation as an exact phase ramp, rotation by rotating
/// the k-space sampling coordinates (trilinear interpolation).
pub fn corrupt_kspace(v: &Volume, traj: &Trajectory, sched: &ReadoutSchedule) -> Result<Volume> {
    let dims = v.dims();
    if sched.axis > 2 {
        return Err(Error::Config(format!("phase-encode axis {} out of range", sched.axis)));
    }
    let n_pe = dims[sched.axis];
    if sched.segments() == 0 || sched.segments() > n_pe {
        return Err(Error::Config(format!(
            "{} segments cannot partition {n_pe} phase-encode lines",
            sched.segments()
        )));
    }
    let (Some(t0), Some(t1)) = (traj.start(), traj.end()) else {
        return Err(Error::Config("empty trajectory".into()));
    };
    if let Some(&t) = sched.times.iter().find(|&&t| !(t >= t0 && t <= t1)) {
        return Err(Error::Config(format!(
            "segment time {t} outside trajectory span [{t0}, {t1}]"
        )));
    }
    let poses: Vec<(Matrix3<f64>, Vector3<f64>)> = sched
        .times
        .iter()
        .map(|&t| {
            let p: &RigidTransform = traj.pose_at(t).expect("time inside trajectory span");
            (p.rotation(), p.translation())
        })
        .collect();

    let spec = CenteredSpectrum::new(v);
    let voxel = v.voxel_size();
    let [nx, ny, nz] = dims;
    let mut out = vec![Complex64::default(); v.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let m = [signed(x, nx), signed(y, ny), signed(z, nz)];
                let row = (m[sched.axis] + (n_pe / 2) as i64) as usize;
                let (r, t) = &poses[sched.segment_of(row, n_pe)];
                // physical frequency in cycles/mm
                let k = Vector3::from_fn(|i, _| m[i] as f64 / (dims[i] as f64 * voxel[i]));
                let src = r.transpose() * k;
                let value = if *r == Matrix3::identity() {
                    spec.at(m)
                } else {
                    spec.sample([0, 1, 2].map(|i| src[i] * dims[i] as f64 * voxel[i]))
                };
                let shift: f64 = (0..3)
                    .map(|i| (m[i] * (dims[i] / 2) as i64) as f64 / dims[i] as f64)
                    .sum();
                let phase = -TAU * (k.dot(t) + shift);
                out[(z * ny + y) * nx + x] = value * Complex64::from_polar(1.0, phase);
            }
        }
    }
    fft3(&mut out, dims, true);
    let data = out
        .iter()
        .map(|c| c.norm().round().clamp(0.0, 65535.0) as u16)
        .collect();
    v.with_data(data)
}
