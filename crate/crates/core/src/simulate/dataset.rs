use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::kspace::{corrupt_kspace, ReadoutSchedule};
use super::phantom::{head_mask, make_phantom};
use super::trajectory::{synth_trajectory, TrajectorySpec};
use crate::bandsplit::{pose_band_targets, BandSpec};
use crate::error::{Error, Result};
use crate::network::mask_path;
use crate::rigid_motion::{sequence_score, JenkinsonParams, SequenceWindow};
use crate::volume_io::{write_manifest, write_nifti, write_tracking_log, DatasetManifest, ManifestEntry, Split};

/// How target motion scores are drawn per item (mm/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDistribution {
    Uniform { low: f64, high: f64 },
    /// Alternating items from a low and a high interval.
    TwoClass { low: [f64; 2], high: [f64; 2] },
}

impl ScoreDistribution {
    fn draw(&self, index: usize, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ScoreDistribution::Uniform { low, high } => rng.random_range(low..=high),
            ScoreDistribution::TwoClass { low, high } => {
                let [a, b] = if index % 2 == 0 { low } else { high };
                rng.random_range(a..=b)
            }
        }
    }

    fn span(&self) -> (f64, f64) {
        match *self {
            ScoreDistribution::Uniform { low, high } => (low, high),
            ScoreDistribution::TwoClass { low, high } => (low[0], high[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub count: usize,
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub scores: ScoreDistribution,
    pub segments: usize,
    /// Train / validation / test counts; `None` means 70/15/15 percent.
    pub split_counts: Option<[usize; 3]>,
    pub window_seconds: f64,
    pub rate: f64,
    pub write_masks: bool,
    /// Name of the planted covariate, monotone in the motion score plus noise.
    pub covariate: Option<String>,
    pub covariate_noise: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            count: 100,
            dims: [32; 3],
            voxel_size: [4.0; 3],
            scores: ScoreDistribution::Uniform { low: 0.0, high: 1.5 },
            segments: 32,
            split_counts: None,
            window_seconds: 60.0,
            rate: 30.0,
            write_masks: true,
            covariate: Some("age".into()),
            covariate_noise: 3.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn splits(&self) -> Result<[usize; 3]> {
        let counts = match self.split_counts {
            Some(c) => c,
            None => {
                let train = (self.count as f64 * 0.70).round() as usize;
                let val = (self.count as f64 * 0.15).round() as usize;
                [train, val, self.count.saturating_sub(train + val)]
            }
        };
        if counts.iter().sum::<usize>() != self.count {
            return Err(Error::Config(format!(
                "split counts {counts:?} do not add up to {} items",
                self.count
            )));
        }
        Ok(counts)
    }

    fn split_of(&self, index: usize, counts: [usize; 3]) -> Split {
        if index < counts[0] {
            Split::Train
        } else if index < counts[0] + counts[1] {
            Split::Validation
        } else {
            Split::Test
        }
    }
}

/// Motion shape of one item at unit level; breathing dominates, with small
/// drift, nodding and white jitter.
fn motion_shape(rng: &mut ChaCha8Rng, start: f64, duration: f64, rate: f64) -> TrajectorySpec {
    fn small(rng: &mut ChaCha8Rng, s: f64) -> f64 {
        rng.random_range(-s..s)
    }
    TrajectorySpec {
        start,
        duration,
        rate,
        drift_rate: [small(rng, 0.01), small(rng, 0.01), small(rng, 0.01)],
        breathing_amplitude: 1.0,
        breathing_frequency: rng.random_range(0.2..0.3),
        breathing_axis: [small(rng, 0.2), small(rng, 0.4), 1.0],
        breathing_phase: rng.random_range(0.0..std::f64::consts::TAU),
        jitter_sd: 0.001,
        rotation_drift_rate: [small(rng, 0.005), small(rng, 0.005), small(rng, 0.005)],
        breathing_rotation_amplitude: rng.random_range(0.1..0.4),
        breathing_rotation_axis: [1.0, small(rng, 0.2), small(rng, 0.2)],
        jitter_rotation_sd: 0.002,
        seed: rng.random(),
    }
}

struct Item {
    entry: ManifestEntry,
}

fn build_item(spec: &DatasetSpec, index: usize, splits: [usize; 3], out_dir: &Path) -> Result<Item> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let target = spec.scores.draw(index, &mut rng);

    // camera clock: log from c0 to c0 + window + 10 s; scanner window 5 s in
    let c0 = rng.random_range(0.0..100.0);
    let offset = rng.random_range(-5.0..5.0);
    let duration = spec.window_seconds + 10.0;
    let window = SequenceWindow::new(c0 + 5.0 - offset, c0 + 5.0 - offset + spec.window_seconds, offset)?;
    let shape = motion_shape(&mut rng, c0, duration, spec.rate);
    let jp = JenkinsonParams::default();
    let unit = sequence_score(&synth_trajectory(&shape)?, Some(&window), &jp)?.value();
    let traj = synth_trajectory(&shape.scaled(target / unit))?;
    let score = sequence_score(&traj, Some(&window), &jp)?.value();
    let bands = pose_band_targets(&traj, &BandSpec::with_sample_rate(spec.rate)?, &window, &jp)?;

    let phantom = make_phantom(spec.dims, spec.voxel_size, rng.random())?;
    let (cam_start, cam_end) = window.camera_span();
    let sched = ReadoutSchedule::uniform(spec.segments, cam_start, cam_end)?;
    let corrupted = corrupt_kspace(&phantom, &traj, &sched)?;

    let volume = format!("vol_{index:04}.nii.gz");
    let log = format!("log_{index:04}.csv");
    write_nifti(&corrupted, out_dir.join(&volume))?;
    if spec.write_masks {
        write_nifti(&head_mask(&phantom), mask_path(&out_dir.join(&volume)))?;
    }
    write_tracking_log(&traj, out_dir.join(&log))?;

    let mut entry = ManifestEntry::new(volume, spec.split_of(index, splits));
    entry.log = Some(log);
    entry.window = Some(window);
    entry.motion_score = Some(score);
    let [d, b, n] = bands.as_array();
    entry.drift = Some(d);
    entry.breathing = Some(b);
    entry.noisy = Some(n);
    if let Some(name) = &spec.covariate {
        let (lo, hi) = spec.scores.span();
        let noise = Normal::new(0.0, spec.covariate_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
        let age = 20.0 + 50.0 * (score - lo) / (hi - lo).max(1e-9) + noise.sample(&mut rng);
        entry.covariates.insert(name.clone(), (age * 10.0).round() / 10.0);
    }
    Ok(Item { entry })
}

/// Generates phantoms, motion logs and corrupted volumes into `out_dir` and
/// writes `manifest.csv` there. Labels are computed from the synthesized
/// trajectories with the same scoring code used for real logs.
pub fn build_dataset(spec: &DatasetSpec, out_dir: &Path) -> Result<DatasetManifest> {
    if spec.count < 2 {
        return Err(Error::Config(format!("dataset needs at least 2 items, got {}", spec.count)));
    }
    let splits = spec.splits()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let items = (0..spec.count)
        .into_par_iter()
        .map(|i| build_item(spec, i, splits, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = DatasetManifest::new(items.into_iter().map(|it| it.entry).collect())?;
    write_manifest(&manifest, out_dir.join("manifest.csv"))?;
    manifest.base_dir = Some(out_dir.to_path_buf());
    Ok(manifest)
}
