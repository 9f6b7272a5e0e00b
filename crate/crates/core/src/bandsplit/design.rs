//! Digital Butterworth design: analog prototype, frequency transform,
//! bilinear transform with pre-warping, then pairing into second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
}

/// Cutoff frequencies in Hz. Bandpass needs both edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoffs {
    Single(f64),
    Band(f64, f64),
}

/// One biquad `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Section {
    fn response(&self, zinv: Complex64) -> Complex64 {
        let zinv2 = zinv * zinv;
        (self.b0 + zinv * self.b1 + zinv2 * self.b2) / (1.0 + zinv * self.a1 + zinv2 * self.a2)
    }

    /// Gain for a constant input.
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// Cascade of second-order sections, immutable after design.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    sections: Vec<Section>,
    order: usize,
    sample_rate: f64,
}

impl FilterCoefficients {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Number of poles of the digital filter.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn is_stable(&self) -> bool {
        self.sections
            .iter()
            .all(|s| s.poles().iter().all(|p| p.norm() < 1.0))
    }

    /// Complex response at frequency `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f / self.sample_rate;
        let zinv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(zinv))
    }

    pub fn magnitude(&self, f: f64) -> f64 {
        self.response(f).norm()
    }
}

struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
        .collect()
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn bilinear(analog: Zpk, fs: f64) -> Zpk {
    let fs2 = Complex64::new(2.0 * fs, 0.0);
    let degree = analog.poles.len() - analog.zeros.len();
    let num: Complex64 = analog.zeros.iter().map(|z| fs2 - z).product();
    let den: Complex64 = analog.poles.iter().map(|p| fs2 - p).product();
    let mut zeros: Vec<Complex64> = analog.zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
    zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
    let poles = analog.poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    Zpk {
        zeros,
        poles,
        gain: analog.gain * (num / den).re,
    }
}

fn analog_design(order: usize, kind: FilterKind, cutoffs: Cutoffs, fs: f64) -> Result<Zpk> {
    let proto = prototype_poles(order);
    let zpk = match (kind, cutoffs) {
        (FilterKind::Lowpass, Cutoffs::Single(fc)) => {
            let wc = prewarp(fc, fs);
            Zpk {
                zeros: vec![],
                poles: proto.iter().map(|p| p * wc).collect(),
                gain: wc.powi(order as i32),
            }
        }
        (FilterKind::Highpass, Cutoffs::Single(fc)) => {
            let wc = prewarp(fc, fs);
            let prod: Complex64 = proto.iter().map(|p| -p).product();
            Zpk {
                zeros: vec![Complex64::new(0.0, 0.0); order],
                poles: proto.iter().map(|p| wc / p).collect(),
                gain: (1.0 / prod).re,
            }
        }
        (FilterKind::Bandpass, Cutoffs::Band(lo, hi)) => {
            let (w1, w2) = (prewarp(lo, fs), prewarp(hi, fs));
            let bw = w2 - w1;
            let w0sq = w1 * w2;
            let poles = proto
                .iter()
                .flat_map(|p| {
                    let half = p * bw / 2.0;
                    let root = (half * half - w0sq).sqrt();
                    [half + root, half - root]
                })
                .collect();
            Zpk {
                zeros: vec![Complex64::new(0.0, 0.0); order],
                poles,
                gain: bw.powi(order as i32),
            }
        }
        _ => {
            return Err(Error::FilterDesign(format!(
                "{kind:?} needs {} cutoff(s)",
                if kind == FilterKind::Bandpass { 2 } else { 1 }
            )))
        }
    };
    Ok(zpk)
}

/// Pairs conjugate poles into biquads; zeros are all real (±1 or 0 mapped to ±1).
fn to_sections(zpk: Zpk) -> Result<Vec<Section>> {
    const IMAG_EPS: f64 = 1e-10;
    let mut complex: Vec<Complex64> = zpk
        .poles
        .iter()
        .copied()
        .filter(|p| p.im > IMAG_EPS * p.norm().max(1.0))
        .collect();
    let mut real: Vec<f64> = zpk
        .poles
        .iter()
        .filter(|p| p.im.abs() <= IMAG_EPS * p.norm().max(1.0))
        .map(|p| p.re)
        .collect();
    // poles far from the unit circle first, as in the usual cascade ordering
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut zeros: Vec<f64> = zpk.zeros.iter().map(|z| z.re).collect();
    zeros.sort_by(|a, b| a.total_cmp(b));
    let mut zero_pairs = Vec::new();
    let (mut lo, mut hi) = (0usize, zeros.len());
    while lo < hi {
        if hi - lo >= 2 {
            zero_pairs.push(vec![zeros[lo], zeros[hi - 1]]);
            lo += 1;
            hi -= 1;
        } else {
            zero_pairs.push(vec![zeros[lo]]);
            lo += 1;
        }
    }

    let mut pole_groups: Vec<(f64, f64)> = complex.iter().map(|p| (-2.0 * p.re, p.norm_sqr())).collect();
    let mut chunks = real.chunks(2);
    for chunk in &mut chunks {
        match chunk {
            [p1, p2] => pole_groups.push((-(p1 + p2), p1 * p2)),
            [p] => pole_groups.push((-p, 0.0)),
            _ => unreachable!(),
        }
    }
    let needed = pole_groups.len().max(zero_pairs.len());
    pole_groups.resize(needed, (0.0, 0.0));
    zero_pairs.resize(needed, vec![]);

    let mut sections: Vec<Section> = pole_groups
        .into_iter()
        .zip(zero_pairs)
        .map(|((a1, a2), zs)| {
            let (b1, b2) = match zs.as_slice() {
                [] => (0.0, 0.0),
                [z] => (-z, 0.0),
                [z1, z2] => (-(z1 + z2), z1 * z2),
                _ => unreachable!(),
            };
            Section {
                b0: 1.0,
                b1,
                b2,
                a1,
                a2,
            }
        })
        .collect();
    let first = sections
        .first_mut()
        .ok_or_else(|| Error::FilterDesign("empty filter".into()))?;
    first.b0 *= zpk.gain;
    first.b1 *= zpk.gain;
    first.b2 *= zpk.gain;
    Ok(sections)
}

/// Digital Butterworth filter as a cascade of second-order sections.
///
/// `order` is the order of the analog lowpass prototype; a bandpass design
/// therefore has `2 * order` poles.
pub fn design_butterworth(
    order: usize,
    kind: FilterKind,
    cutoffs: Cutoffs,
    sample_rate: f64,
) -> Result<FilterCoefficients> {
    if order == 0 {
        return Err(Error::FilterDesign("order must be positive".into()));
    }
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::FilterDesign(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let nyquist = sample_rate / 2.0;
    let check = |f: f64| -> Result<()> {
        if !(f > 0.0) || f >= nyquist {
            return Err(Error::FilterDesign(format!(
                "cutoff {f} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        Ok(())
    };
    match cutoffs {
        Cutoffs::Single(f) => check(f)?,
        Cutoffs::Band(lo, hi) => {
            check(lo)?;
            check(hi)?;
            if lo >= hi {
                return Err(Error::FilterDesign(format!(
                    "band edges must satisfy low < high, got {lo} and {hi}"
                )));
            }
        }
    }
    let analog = analog_design(order, kind, cutoffs, sample_rate)?;
    let poles = analog.poles.len();
    let sections = to_sections(bilinear(analog, sample_rate))?;
    let coeffs = FilterCoefficients {
        sections,
        order: poles,
        sample_rate,
    };
    if !coeffs.is_stable() {
        return Err(Error::FilterDesign("designed filter is unstable".into()));
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 30.0;

    #[test]
    fn lowpass_dc_and_cutoff() {
        let lp = design_butterworth(4, FilterKind::Lowpass, Cutoffs::Single(0.1), FS).unwrap();
        assert_eq!(lp.sections().len(), 2);
        assert_eq!(lp.order(), 4);
        assert!((lp.magnitude(0.0) - 1.0).abs() < 1e-9);
        assert!((lp.magnitude(0.1) - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn highpass_cutoff_and_nyquist() {
        let hp = design_butterworth(4, FilterKind::Highpass, Cutoffs::Single(0.5), FS).unwrap();
        assert!(hp.magnitude(0.0) < 1e-9);
        assert!((hp.magnitude(FS / 2.0) - 1.0).abs() < 1e-9);
        assert!((hp.magnitude(0.5) - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn bandpass_edges_and_center() {
        let bp =
            design_butterworth(4, FilterKind::Bandpass, Cutoffs::Band(0.1, 0.5), FS).unwrap();
        assert_eq!(bp.order(), 8);
        assert_eq!(bp.sections().len(), 4);
        assert!((bp.magnitude(0.1) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((bp.magnitude(0.5) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!(bp.magnitude(0.3) >= 0.99);
        assert!(bp.magnitude(0.0) < 1e-9);
    }

    #[test]
    fn odd_orders_are_supported() {
        for order in [1, 3, 5] {
            let lp =
                design_butterworth(order, FilterKind::Lowpass, Cutoffs::Single(2.0), FS).unwrap();
            assert!((lp.magnitude(2.0) - 0.5f64.sqrt()).abs() < 1e-6, "order {order}");
            let bp = design_butterworth(order, FilterKind::Bandpass, Cutoffs::Band(1.0, 3.0), FS)
                .unwrap();
            assert!((bp.magnitude(1.0) - 0.5f64.sqrt()).abs() < 1e-6, "order {order}");
            assert!((bp.magnitude(3.0) - 0.5f64.sqrt()).abs() < 1e-6, "order {order}");
        }
    }

    #[test]
    fn monotone_transition() {
        let grid: Vec<f64> = (0..512).map(|i| i as f64 / 511.0 * FS / 2.0).collect();
        let lp = design_butterworth(4, FilterKind::Lowpass, Cutoffs::Single(0.1), FS).unwrap();
        let hp = design_butterworth(4, FilterKind::Highpass, Cutoffs::Single(0.5), FS).unwrap();
        let bp =
            design_butterworth(4, FilterKind::Bandpass, Cutoffs::Band(0.1, 0.5), FS).unwrap();
        let tol = 1e-12;
        for w in grid.windows(2) {
            assert!(lp.magnitude(w[1]) <= lp.magnitude(w[0]) + tol);
            assert!(hp.magnitude(w[1]) + tol >= hp.magnitude(w[0]));
        }
        // bandpass rises up to the geometric center (in prewarped frequency) and falls after it
        let center = {
            let (w1, w2) = (prewarp(0.1, FS), prewarp(0.5, FS));
            let w0 = (w1 * w2).sqrt();
            (w0 / (2.0 * FS)).atan() * FS / PI
        };
        for w in grid.windows(2) {
            if w[1] <= center {
                assert!(bp.magnitude(w[1]) + tol >= bp.magnitude(w[0]));
            } else if w[0] >= center {
                assert!(bp.magnitude(w[1]) <= bp.magnitude(w[0]) + tol);
            }
        }
    }

    #[test]
    fn cutoff_at_or_above_nyquist_fails() {
        assert!(matches!(
            design_butterworth(4, FilterKind::Lowpass, Cutoffs::Single(15.0), FS),
            Err(Error::FilterDesign(_))
        ));
        assert!(design_butterworth(4, FilterKind::Bandpass, Cutoffs::Band(0.5, 0.1), FS).is_err());
        assert!(design_butterworth(4, FilterKind::Bandpass, Cutoffs::Single(0.5), FS).is_err());
        assert!(design_butterworth(0, FilterKind::Lowpass, Cutoffs::Single(1.0), FS).is_err());
    }
}
