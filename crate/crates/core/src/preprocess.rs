//! Intensity preprocessing variants and interpolation-free augmentation.
//!
//! Everything here stays in the uint16 domain and never changes geometry.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::volume_io::Volume;

/// Keeps the 8 least significant bits of every voxel.
pub fn lsb8(v: &Volume) -> Volume {
    v.map(|x| x & 0xff)
}

/// Nearest-rank percentile (`p` in (0, 100]) of a non-empty slice.
pub fn nearest_rank(values: &mut [u16], p: f64) -> u16 {
    values.sort_unstable();
    let rank = ((p / 100.0) * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Maps `[0, p80]` of the nonzero intensities linearly onto `[0, 255]`,
/// clamping everything brighter.
pub fn robust_scale(v: &Volume) -> Result<Volume> {
    let mut nonzero: Vec<u16> = v.data().iter().copied().filter(|&x| x > 0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegenerateInput("all-zero volume".into()));
    }
    let robust_max = nearest_rank(&mut nonzero, 80.0) as f64;
    Ok(v.map(|x| (x as f64 / robust_max * 255.0).round().min(255.0) as u16))
}

/// Zeroes every voxel flagged by the head mask, leaving only background.
pub fn mask_background(v: &Volume, head_mask: &Volume) -> Result<Volume> {
    if v.dims() != head_mask.dims() {
        return Err(Error::ShapeMismatch(format!(
            "mask dims {:?} differ from volume dims {:?}",
            head_mask.dims(),
            v.dims()
        )));
    }
    let data = v
        .data()
        .iter()
        .zip(head_mask.data())
        .map(|(&x, &m)| if m != 0 { 0 } else { x })
        .collect();
    v.with_data(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preprocess {
    None,
    #[default]
    Lsb8,
    Robust,
    Background,
}

impl Preprocess {
    pub fn as_str(self) -> &'static str {
        match self {
            Preprocess::None => "none",
            Preprocess::Lsb8 => "lsb8",
            Preprocess::Robust => "robust",
            Preprocess::Background => "background",
        }
    }

    pub fn needs_mask(self) -> bool {
        self == Preprocess::Background
    }

    /// Divisor that brings preprocessed intensities to O(1) reals.
    pub fn input_scale(self) -> f64 {
        match self {
            Preprocess::Lsb8 | Preprocess::Robust => 255.0,
            Preprocess::None | Preprocess::Background => 65535.0,
        }
    }

    pub fn apply(self, v: &Volume, head_mask: Option<&Volume>) -> Result<Volume> {
        match self {
            Preprocess::None => Ok(v.clone()),
            Preprocess::Lsb8 => Ok(lsb8(v)),
            Preprocess::Robust => robust_scale(v),
            Preprocess::Background => {
                let mask = head_mask.ok_or_else(|| {
                    Error::Config("background preprocessing needs a head mask".into())
                })?;
                mask_background(v, mask)
            }
        }
    }
}

impl fmt::Display for Preprocess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preprocess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Preprocess::None),
            "lsb8" => Ok(Preprocess::Lsb8),
            "robust" => Ok(Preprocess::Robust),
            "background" => Ok(Preprocess::Background),
            other => Err(Error::Config(format!(
                "unknown preprocessing {other:?} (none, lsb8, robust, background)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub intensity_range: [f64; 2],
    pub flip_probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            intensity_range: [0.9, 1.1],
            flip_probability: 0.3,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Scale fixed at 1 and no flips.
    pub fn identity() -> Self {
        Self {
            intensity_range: [1.0, 1.0],
            flip_probability: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.intensity_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "intensity range must satisfy 0 < low <= high, got [{lo}, {hi}]"
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::Config(format!(
                "flip probability must be in [0, 1], got {}",
                self.flip_probability
            )));
        }
        Ok(())
    }
}

/// Random choices of one augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub scale: f64,
    pub flips: [bool; 3],
}

impl AugmentDraw {
    /// Deterministic in `(cfg.seed, draw_index)`.
    pub fn sample(cfg: &AugmentConfig, draw_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(draw_index);
        let [lo, hi] = cfg.intensity_range;
        let scale = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let flips = std::array::from_fn(|_| rng.random::<f64>() < cfg.flip_probability);
        Self { scale, flips }
    }

    pub fn apply(&self, v: &Volume) -> Volume {
        let mut out = if self.scale == 1.0 {
            v.clone()
        } else {
            let s = self.scale;
            v.map(|x| (x as f64 * s).round().clamp(0.0, 65535.0) as u16)
        };
        for (axis, &flip) in self.flips.iter().enumerate() {
            if flip {
                out = out.flip(axis);
            }
        }
        out
    }
}

/// Intensity scaling and per-axis flips; no resampling of any kind.
pub fn augment(v: &Volume, cfg: &AugmentConfig, draw_index: u64) -> Volume {
    AugmentDraw::sample(cfg, draw_index).apply(v)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::volume_io::Modality;

    fn vol(dims: [usize; 3], data: Vec<u16>) -> Volume {
        Volume::new(dims, [1.0; 3], data, Modality::T1).unwrap()
    }

    #[test]
    fn lsb8_values() {
        let v = vol([4, 1, 1], vec![257, 255, 512, 65535]);
        assert_eq!(lsb8(&v).data(), &[1, 255, 0, 255]);
        assert_eq!(lsb8(&lsb8(&v)), lsb8(&v));
    }

    #[test]
    fn robust_scale_cases() {
        let v = vol([3, 1, 1], vec![0, 40, 40]);
        assert_eq!(robust_scale(&v).unwrap().data(), &[0, 255, 255]);

        let mut data = vec![1u16; 10];
        data.extend(vec![2u16; 80]);
        data.extend(vec![100u16; 10]);
        data.push(0);
        let out = robust_scale(&vol([101, 1, 1], data)).unwrap();
        assert_eq!(out.data()[0], 128);
        assert_eq!(out.data()[10], 255);
        assert_eq!(out.data()[95], 255);
        assert_eq!(out.data()[100], 0);

        assert!(matches!(
            robust_scale(&vol([2, 1, 1], vec![0, 0])),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn background_masking() {
        let v = vol([2, 2, 1], vec![5, 6, 7, 8]);
        let zeros = vol([2, 2, 1], vec![0; 4]);
        let ones = vol([2, 2, 1], vec![1; 4]);
        let checker = vol([2, 2, 1], vec![1, 0, 0, 1]);
        assert_eq!(mask_background(&v, &zeros).unwrap(), v);
        assert_eq!(mask_background(&v, &ones).unwrap().data(), &[0; 4]);
        assert_eq!(mask_background(&v, &checker).unwrap().data(), &[0, 6, 7, 0]);
        assert!(matches!(
            mask_background(&v, &vol([4, 1, 1], vec![0; 4])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn identity_augmentation() {
        let v = vol([3, 2, 2], (0..12).collect());
        assert_eq!(augment(&v, &AugmentConfig::identity(), 17), v);
    }

    #[test]
    fn scaling_arithmetic() {
        let v = vol([2, 1, 1], vec![100, 65000]);
        let d = AugmentDraw {
            scale: 1.1,
            flips: [false; 3],
        };
        assert_eq!(d.apply(&v).data(), &[110, 65535]);
    }

    #[test]
    fn draws_are_reproducible_and_vary() {
        let cfg = AugmentConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(AugmentDraw::sample(&cfg, 3), AugmentDraw::sample(&cfg, 3));
        let draws: Vec<_> = (0..200).map(|i| AugmentDraw::sample(&cfg, i)).collect();
        let flips = draws.iter().filter(|d| d.flips[0]).count();
        assert!((35..=85).contains(&flips), "{flips}");
        assert!(draws.iter().all(|d| (0.9..=1.1).contains(&d.scale)));
    }

    #[test]
    fn preprocess_parse() {
        assert_eq!("robust".parse::<Preprocess>().unwrap(), Preprocess::Robust);
        assert!("lsb7".parse::<Preprocess>().is_err());
        let v = vol([1, 1, 1], vec![1]);
        assert!(Preprocess::Background.apply(&v, None).is_err());
    }

    fn arb_volume() -> impl Strategy<Value = Volume> {
        (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(x, y, z)| {
            proptest::collection::vec(any::<u16>(), x * y * z)
                .prop_map(move |d| vol([x, y, z], d))
        })
    }

    proptest! {
        #[test]
        fn flips_are_involutions(v in arb_volume(), axis in 0usize..3) {
            prop_assert_eq!(v.flip(axis).flip(axis), v);
        }

        #[test]
        fn lsb8_commutes_with_flips(v in arb_volume(), axis in 0usize..3) {
            prop_assert_eq!(lsb8(&v.flip(axis)), lsb8(&v).flip(axis));
        }

        #[test]
        fn geometry_is_preserved(v in arb_volume(), seed in any::<u64>(), idx in any::<u64>()) {
            let cfg = AugmentConfig { seed, ..Default::default() };
            let a = augment(&v, &cfg, idx);
            prop_assert_eq!(a.dims(), v.dims());
            prop_assert_eq!(a.voxel_size(), v.voxel_size());
            prop_assert_eq!(&a, &augment(&v, &cfg, idx));
            if v.data().iter().any(|&x| x > 0) {
                prop_assert_eq!(robust_scale(&v).unwrap().dims(), v.dims());
            }
            prop_assert_eq!(lsb8(&v).dims(), v.dims());
        }
    }
}
