use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{Loss, NetConfig, Target, TrainConfig};
use super::layers::{Tensor, BN_MOMENTUM};
use super::model::{self, Mode};
use super::params::{Layout, Params};
use crate::error::{Error, Result};
use crate::metrics;
use crate::preprocess::{augment, AugmentConfig, Preprocess};
use crate::rigid_motion::MotionScore;
use crate::volume_io::{read_nifti, DatasetManifest, ManifestEntry, Split, Volume};

/// A trained (or freshly initialized) network with everything needed to
/// turn a raw volume into a motion score.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: NetConfig,
    pub params: Params,
    pub loss: Loss,
    pub preprocess: Preprocess,
    pub target: Target,
}

impl Model {
    pub fn new(net: NetConfig, loss: Loss, preprocess: Preprocess, target: Target) -> Result<Self> {
        if net.output != loss.output_head() {
            return Err(Error::Config(format!(
                "loss {} needs output head {:?}, network config has {:?}",
                loss.kind,
                loss.output_head(),
                net.output
            )));
        }
        let params = Params::init(&net)?;
        Ok(Self {
            net,
            params,
            loss,
            preprocess,
            target,
        })
    }

    /// Scores for volumes that are already preprocessed.
    pub fn predict_prepared(&self, volumes: &[&Volume]) -> Result<Vec<f64>> {
        let x = to_tensor(volumes, self.preprocess.input_scale(), self.net.spatial_multiple())?;
        let (out, _) = model::forward(&self.params, &self.net, &x, Mode::Eval)?;
        Ok(model::decode_output(&out, &self.loss))
    }

    /// Preprocesses and scores one raw volume.
    pub fn predict(&self, volume: &Volume, head_mask: Option<&Volume>) -> Result<MotionScore> {
        let v = self.preprocess.apply(volume, head_mask)?;
        MotionScore::new(self.predict_prepared(&[&v])?[0])
    }
}

/// Stacks volumes into a `[batch, 1, z, y, x]` tensor divided by `scale`,
/// zero-padded at the high end of each axis to a multiple of `multiple`.
pub fn to_tensor(volumes: &[&Volume], scale: f64, multiple: usize) -> Result<Tensor> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
    let dims = first.dims();
    if let Some(v) = volumes.iter().find(|v| v.dims() != dims) {
        return Err(Error::ShapeMismatch(format!(
            "batch mixes volume dims {:?} and {:?}",
            dims,
            v.dims()
        )));
    }
    let padded = dims.map(|n| n.div_ceil(multiple) * multiple);
    let [px, py, pz] = padded;
    let mut t = Tensor::zeros([volumes.len(), 1, pz, py, px]);
    let plane = px * py * pz;
    for (b, v) in volumes.iter().enumerate() {
        let dst = &mut t.data[b * plane..(b + 1) * plane];
        let [nx, ny, nz] = dims;
        for z in 0..nz {
            for y in 0..ny {
                let src = &v.data()[(z * ny + y) * nx..(z * ny + y + 1) * nx];
                let row = &mut dst[(z * py + y) * px..(z * py + y) * px + nx];
                for (d, &s) in row.iter_mut().zip(src) {
                    *d = s as f64 / scale;
                }
            }
        }
    }
    Ok(t)
}

/// One preprocessed training or validation item.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub volume: Volume,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// NaN when predictions or labels are constant.
    pub val_spearman: f64,
}

pub const LOSS_LOG_HEADER: &str = "epoch,train_loss,val_loss,val_spearman";

pub fn write_loss_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut out = String::from(LOSS_LOG_HEADER);
    out.push('\n');
    for e in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_loss, e.val_spearman
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn target_of(entry: &ManifestEntry, target: Target) -> Option<f64> {
    match target {
        Target::MotionScore => entry.motion_score,
        Target::Drift => entry.drift,
        Target::Breathing => entry.breathing,
        Target::Noisy => entry.noisy,
    }
}

/// Head-mask file stored next to a volume: `scan.nii.gz` → `scan_mask.nii.gz`.
pub fn mask_path(volume: &Path) -> PathBuf {
    let name = volume
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (stem, ext) = match name.find(".nii") {
        Some(i) => name.split_at(i),
        None => (name.as_str(), ""),
    };
    volume.with_file_name(format!("{stem}_mask{ext}"))
}

/// Reads and preprocesses one manifest entry.
pub fn load_prepared(manifest: &DatasetManifest, entry: &ManifestEntry, preprocess: Preprocess) -> Result<Volume> {
    let path = manifest.resolve(&entry.volume);
    let volume = read_nifti(&path)?;
    let mask = if preprocess.needs_mask() {
        Some(read_nifti(&mask_path(&path))?)
    } else {
        None
    };
    preprocess.apply(&volume, mask.as_ref())
}

/// Loads a labeled split. Fails on an empty split or a missing label.
pub fn load_split(
    manifest: &DatasetManifest,
    split: Split,
    target: Target,
    preprocess: Preprocess,
) -> Result<Vec<Sample>> {
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    if entries.is_empty() {
        return Err(Error::EmptySplit(split.as_str()));
    }
    entries
        .into_iter()
        .map(|e| {
            let t = target_of(e, target).ok_or_else(|| Error::MissingLabel(e.volume.clone()))?;
            Ok(Sample {
                id: e.volume.clone(),
                volume: load_prepared(manifest, e, preprocess)?,
                target: t,
            })
        })
        .collect()
}

/// Trains on the manifest's train split, validating on its validation split.
pub fn fit(
    manifest: &DatasetManifest,
    net: &NetConfig,
    train: &TrainConfig,
    preprocess: Preprocess,
    augmentation: &AugmentConfig,
) -> Result<(Model, Vec<EpochLog>)> {
    train.validate()?;
    let tr = load_split(manifest, Split::Train, train.target, preprocess)?;
    let va = load_split(manifest, Split::Validation, train.target, preprocess)?;
    fit_samples(&tr, &va, net, train, preprocess, augmentation)
}

fn evaluate(model: &Model, samples: &[Sample], batch_size: usize) -> Result<(f64, Vec<f64>)> {
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size) {
        let vols: Vec<&Volume> = chunk.iter().map(|s| &s.volume).collect();
        let x = to_tensor(&vols, model.preprocess.input_scale(), model.net.spatial_multiple())?;
        let (out, _) = model::forward(&model.params, &model.net, &x, Mode::Eval)?;
        let targets: Vec<f64> = chunk.iter().map(|s| s.target).collect();
        let (loss, _) = model::loss_and_grad(&out, &targets, &model.loss)?;
        total += loss * chunk.len() as f64;
        preds.extend(model::decode_output(&out, &model.loss));
    }
    Ok((total / samples.len() as f64, preds))
}

/// Mean loss of `model` over `samples` in inference mode.
pub fn eval_loss(model: &Model, samples: &[Sample]) -> Result<f64> {
    Ok(evaluate(model, samples, 2)?.0)
}

fn update_running_stats(params: &mut Params, net: &NetConfig, stats: &[Option<(&[f64], &[f64])>]) {
    let layout = Layout::new(net);
    for (slots, s) in layout.blocks.iter().zip(stats) {
        if let (Some(bn), Some((mean, var))) = (slots.bn, s) {
            for (r, &m) in params.tensors[bn.running_mean].data.iter_mut().zip(*mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            for (r, &v) in params.tensors[bn.running_var].data.iter_mut().zip(*var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
            }
        }
    }
}

/// Training loop over in-memory, already preprocessed samples. Returns the
/// parameters of the epoch with the best validation Spearman ρ (lower
/// validation loss breaks ties, including the all-undefined case).
pub fn fit_samples(
    train_set: &[Sample],
    val_set: &[Sample],
    net: &NetConfig,
    train: &TrainConfig,
    preprocess: Preprocess,
    augmentation: &AugmentConfig,
) -> Result<(Model, Vec<EpochLog>)> {
    train.validate()?;
    augmentation.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    let loss = train.resolved_loss()?;
    let mut model = Model::new(net.clone(), loss, preprocess, train.target)?;
    let mut adam = Adam::new(&model.params, train.learning_rate, train.beta1, train.beta2, train.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(train.epochs);
    let mut best: Option<(f64, f64, Params)> = None;
    let mut step = 0usize;
    let mut draw = 0u64;

    'epochs: for epoch in 1..=train.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(train.batch_size) {
            if train.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let augmented: Vec<Volume> = batch
                .iter()
                .map(|&i| {
                    draw += 1;
                    augment(&train_set[i].volume, augmentation, draw)
                })
                .collect();
            let refs: Vec<&Volume> = augmented.iter().collect();
            let x = to_tensor(&refs, preprocess.input_scale(), net.spatial_multiple())?;
            let targets: Vec<f64> = batch.iter().map(|&i| train_set[i].target).collect();
            let key = train.seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let (out, cache) = model::forward(&model.params, net, &x, Mode::Train { dropout_key: key })?;
            let (batch_loss, grad) = model::loss_and_grad(&out, &targets, &model.loss)?;
            let grads = model::backward(&model.params, net, &cache, &grad)?;
            adam.update(&mut model.params, &grads);
            update_running_stats(&mut model.params, net, &cache.batch_stats());
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();
            step += 1;
        }
        if seen == 0 {
            break;
        }
        let (val_loss, preds) = evaluate(&model, val_set, train.batch_size.max(2))?;
        let truth: Vec<f64> = val_set.iter().map(|s| s.target).collect();
        let rho = metrics::spearman_rho(&preds, &truth).unwrap_or(f64::NAN);
        let entry = EpochLog {
            epoch,
            train_loss: epoch_loss / seen as f64,
            val_loss,
            val_spearman: rho,
        };
        log::info!(
            "epoch {epoch}: train loss {:.5}, val loss {:.5}, val rho {:.4}",
            entry.train_loss,
            val_loss,
            rho
        );
        log.push(entry);
        let key = if rho.is_finite() { rho } else { f64::NEG_INFINITY };
        let better = match &best {
            None => true,
            Some((bk, bl, _)) => key > *bk || (key == *bk && val_loss < *bl),
        };
        if better {
            best = Some((key, val_loss, model.params.clone()));
        }
    }
    if let Some((_, _, params)) = best {
        model.params = params;
    }
    Ok((model, log))
}
