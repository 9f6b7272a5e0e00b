//! Synthetic ground truth: head phantoms, motion traces, segmented k-space
//! corruption and complete labeled datasets.

mod dataset;
mod kspace;
mod phantom;
mod trajectory;

pub use dataset::{build_dataset, DatasetSpec, ScoreDistribution};
pub use kspace::{corrupt_kspace, ReadoutSchedule};
pub use phantom::{head_mask, make_phantom};
pub use trajectory::{synth_trajectory, TrajectorySpec};
