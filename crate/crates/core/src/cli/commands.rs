use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{
    AesArgs, BandDomain, Command, EvaluateArgs, NetPreset, NormArg, PredictArgs, ScoreArgs, SimulateArgs, TrainArgs,
};
use crate::bandsplit::{band_targets, pose_band_targets, BandSpec};
use crate::error::{Error, Result};
use crate::metrics::{aes, correlate_covariate, EvalReport, REPORT_HEADER};
use crate::network::{
    fit, load_checkpoint, mask_path, save_checkpoint, target_of, write_loss_log, LossKind, Model, NetConfig, Norm,
    OutputHead, TrainConfig,
};
use crate::preprocess::AugmentConfig;
use crate::rigid_motion::{framewise_differences, sequence_score, JenkinsonParams, SequenceWindow, Trajectory};
use crate::simulate::{build_dataset, DatasetSpec, ScoreDistribution};
use crate::softbin::BinGrid;
use crate::volume_io::{read_manifest, read_nifti, read_tracking_log, DatasetManifest, ManifestEntry};

/// Name of the resolved-config echo written into output directories.
pub const ECHO_FILE: &str = "run_config.txt";

pub(super) fn dispatch(cmd: &Command, resolved: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Score(a) => score(a, resolved, out, err),
        Command::Simulate(a) => simulate(a, resolved, out),
        Command::Train(a) => train(a, resolved, out),
        Command::Predict(a) => predict(a, resolved, out, err),
        Command::Evaluate(a) => evaluate(a, resolved, out, err),
        Command::Aes(a) => aes_cmd(a, resolved, out, err),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Echo file stored next to an output file: `preds.csv` → `preds_config.txt`.
fn echo_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{stem}_config.txt"))
}

fn echo_to_stderr(resolved: &str, err: &mut dyn Write) {
    for line in resolved.lines() {
        let _ = if line.starts_with('#') {
            writeln!(err, "{line}")
        } else {
            writeln!(err, "# {line}")
        };
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Sampling rate from the median interval of the log.
fn log_rate(traj: &Trajectory) -> Result<f64> {
    let times: Vec<f64> = traj.times().collect();
    let mut dts: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if dts.is_empty() {
        return Err(Error::TooFewSamples(times.len()));
    }
    dts.sort_by(f64::total_cmp);
    Ok(1.0 / dts[dts.len() / 2])
}

fn score(a: &ScoreArgs, resolved: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    echo_to_stderr(resolved, err);
    let traj = read_tracking_log(&a.log)?;
    let jp = JenkinsonParams::with_radius(a.radius);
    let window = match a.window.as_deref() {
        Some(&[start, end]) => Some(SequenceWindow::new(start, end, a.offset)?),
        Some(_) => unreachable!("clap enforces two window values"),
        None => None,
    };
    let total = sequence_score(&traj, window.as_ref(), &jp)?;
    let mut row = format!("{:?}", total.value());
    if a.bands {
        let w = match window {
            Some(w) => w,
            None => {
                let (Some(s), Some(e)) = (traj.start(), traj.end()) else {
                    return Err(Error::TooFewSamples(traj.len()));
                };
                SequenceWindow::new(s, e, 0.0)?
            }
        };
        let spec = BandSpec::new(a.low, a.high, a.order, log_rate(&traj)?)?;
        let bands = match a.band_domain {
            BandDomain::Pose => pose_band_targets(&traj, &spec, &w, &jp)?,
            BandDomain::Rate => band_targets(&framewise_differences(&traj, &jp)?, &spec, &w)?,
        };
        for v in bands.as_array() {
            row.push_str(&format!(",{v:?}"));
        }
    }
    emit(out, &format!("{row}\n"))
}

fn simulate(a: &SimulateArgs, resolved: &str, out: &mut dyn Write) -> Result<()> {
    let dims = match a.dims.as_slice() {
        &[n] => [n; 3],
        &[x, y, z] => [x, y, z],
        other => return Err(Error::Config(format!("--dims takes 1 or 3 values, got {}", other.len()))),
    };
    let split_counts = match a.splits.as_deref() {
        Some(&[t, v, s]) => Some([t, v, s]),
        Some(_) => unreachable!("clap enforces three split counts"),
        None => None,
    };
    let scores = if a.two_class {
        ScoreDistribution::TwoClass {
            low: [0.0, 0.2],
            high: [0.8, 1.5],
        }
    } else {
        if !(a.low >= 0.0 && a.high > a.low) {
            return Err(Error::Config(format!("need 0 <= low < high, got [{}, {}]", a.low, a.high)));
        }
        ScoreDistribution::Uniform { low: a.low, high: a.high }
    };
    let spec = DatasetSpec {
        count: a.n,
        dims,
        voxel_size: [a.voxel; 3],
        scores,
        segments: a.segments,
        split_counts,
        write_masks: !a.no_masks,
        covariate: Some(a.covariate.clone()),
        covariate_noise: a.covariate_noise,
        seed: a.seed,
        ..DatasetSpec::default()
    };
    let manifest = build_dataset(&spec, &a.out)?;
    write_file(&a.out.join(ECHO_FILE), resolved)?;
    log::info!("wrote {} items to {}", manifest.entries.len(), a.out.display());
    emit(out, &format!("{}\n", a.out.join("manifest.csv").display()))
}

fn train(a: &TrainArgs, resolved: &str, out: &mut dyn Write) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    let grid = BinGrid::new(a.bin_min, a.bin_max, a.bin_count)?;
    let base = match a.net {
        NetPreset::Desk => NetConfig::desk(),
        NetPreset::Sfcn => NetConfig::sfcn(),
    };
    let net = NetConfig {
        output: match a.loss {
            LossKind::SoftbinKl => OutputHead::SoftBins { bins: a.bin_count },
            LossKind::Mse => OutputHead::Scalar,
        },
        norm: match a.norm {
            NormArg::None => Norm::None,
            NormArg::Batch => Norm::Batch,
        },
        dropout_rate: a.dropout,
        seed: a.seed,
        ..base
    };
    net.validate()?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        max_steps: a.max_steps,
        batch_size: a.batch,
        learning_rate: a.lr,
        loss: a.loss,
        grid: Some(grid),
        sigma: a.sigma,
        target: a.target,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let augment = if a.no_augment {
        AugmentConfig::identity()
    } else {
        AugmentConfig {
            seed: a.seed,
            ..AugmentConfig::default()
        }
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_file(&a.out.join(ECHO_FILE), resolved)?;
    let (model, log) = fit(&manifest, &net, &cfg, a.preprocess, &augment)?;
    let ckpt = a.out.join("model.ckpt");
    save_checkpoint(&ckpt, &model)?;
    write_loss_log(&a.out.join("loss_log.csv"), &log)?;
    emit(out, &format!("{}\n", ckpt.display()))
}

fn predict_one(model: &Model, path: &Path, mask: Option<&Path>) -> Result<f64> {
    let volume = read_nifti(path)?;
    let mask = match (mask, model.preprocess.needs_mask()) {
        (Some(m), _) => Some(read_nifti(m)?),
        (None, true) => Some(read_nifti(mask_path(path))?),
        (None, false) => None,
    };
    Ok(model.predict(&volume, mask.as_ref())?.value())
}

/// `volume,motion_score` rows.
fn predictions_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("volume,motion_score\n");
    for (v, p) in rows {
        s.push_str(&format!("{v},{p:?}\n"));
    }
    s
}

fn predict(a: &PredictArgs, resolved: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let rows: Vec<(String, f64)> = if let Some(path) = &a.volume {
        vec![(path.display().to_string(), predict_one(&model, path, a.mask.as_deref())?)]
    } else {
        let manifest = read_manifest(a.manifest.as_ref().expect("clap requires volume or manifest"))?;
        let entries: Vec<&ManifestEntry> = manifest
            .entries
            .iter()
            .filter(|e| a.split.is_none_or(|s| e.split == s))
            .collect();
        entries
            .par_iter()
            .map(|e| Ok((e.volume.clone(), predict_one(&model, &manifest.resolve(&e.volume), None)?)))
            .collect::<Result<Vec<_>>>()?
    };
    match &a.out {
        Some(path) => {
            write_file(path, &predictions_csv(&rows))?;
            write_file(&echo_path(path), resolved)
        }
        None => {
            echo_to_stderr(resolved, err);
            if a.volume.is_some() {
                emit(out, &format!("{:?}\n", rows[0].1))
            } else {
                emit(out, &predictions_csv(&rows))
            }
        }
    }
}

/// Reads `volume,<value>` rows in file order.
pub fn read_value_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let bad = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            row: i + 1,
            reason,
        };
        if rec.len() < 2 {
            return Err(bad(format!("expected volume,value but got {} fields", rec.len())));
        }
        let value: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("cannot parse value {:?}", &rec[1])))?;
        if !value.is_finite() {
            return Err(bad("non-finite value".into()));
        }
        let volume = rec[0].trim().to_string();
        if seen.insert(volume.clone(), i).is_some() {
            return Err(Error::DuplicateVolume(volume));
        }
        rows.push((volume, value));
    }
    Ok(rows)
}

/// Metric rows for one evaluation, in `metric,value,n,p_value` layout.
pub fn evaluate_rows(
    predictions: &[(String, f64)],
    manifest: &DatasetManifest,
    a: &EvaluateArgs,
    labels: Option<&[(String, f64)]>,
) -> Result<String> {
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| a.split.is_none_or(|s| e.split == s))
        .collect();
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|(v, _)| manifest.find(v).is_none())
        .map(|(v, _)| v.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "predictions for volumes not in the manifest: {}",
            unknown.join(", ")
        )));
    }
    let by_volume: HashMap<&str, f64> = predictions.iter().map(|(v, p)| (v.as_str(), *p)).collect();
    let missing: Vec<String> = entries
        .iter()
        .filter(|e| !by_volume.contains_key(e.volume.as_str()))
        .map(|e| e.volume.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingEntries(missing));
    }
    let pred: Vec<f64> = entries.iter().map(|e| by_volume[e.volume.as_str()]).collect();

    let truth: Option<Vec<f64>> = match labels {
        Some(rows) => {
            let map: HashMap<&str, f64> = rows.iter().map(|(v, t)| (v.as_str(), *t)).collect();
            let missing: Vec<String> = entries
                .iter()
                .filter(|e| !map.contains_key(e.volume.as_str()))
                .map(|e| e.volume.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingEntries(missing));
            }
            Some(entries.iter().map(|e| map[e.volume.as_str()]).collect())
        }
        None => entries.iter().map(|e| target_of(e, a.target)).collect(),
    };

    let mut csv = format!("{REPORT_HEADER}\n");
    match (&truth, &a.covariate) {
        (Some(t), _) => {
            let report = EvalReport::compute(t, &pred)?;
            csv.push_str(report.to_csv().split_once('\n').map_or("", |(_, rows)| rows));
        }
        (None, None) => {
            let unlabeled = entries
                .iter()
                .find(|e| target_of(e, a.target).is_none())
                .map(|e| e.volume.clone())
                .unwrap_or_default();
            return Err(Error::MissingLabel(unlabeled));
        }
        (None, Some(_)) => {}
    }
    if let Some(name) = &a.covariate {
        let scored: Vec<(String, f64)> = entries.iter().map(|e| e.volume.clone()).zip(pred.iter().copied()).collect();
        let c = correlate_covariate(&scored, name, manifest)?;
        csv.push_str(&format!("{name}_spearman,{},{},{}\n", c.rho, c.n, c.p));
        csv.push_str(&format!("{name}_slope,{},{},\n", c.slope, c.n));
        csv.push_str(&format!("{name}_intercept,{},{},\n", c.intercept, c.n));
    }
    Ok(csv)
}

fn evaluate(a: &EvaluateArgs, resolved: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let predictions = read_value_csv(&a.predictions)?;
    let manifest = read_manifest(&a.manifest)?;
    let labels = a.labels.as_deref().map(read_value_csv).transpose()?;
    let csv = evaluate_rows(&predictions, &manifest, a, labels.as_deref())?;
    match &a.out {
        Some(path) => {
            write_file(path, &csv)?;
            write_file(&echo_path(path), resolved)
        }
        None => {
            echo_to_stderr(resolved, err);
            emit(out, &csv)
        }
    }
}

fn aes_cmd(a: &AesArgs, resolved: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    echo_to_stderr(resolved, err);
    let v = read_nifti(&a.volume)?;
    emit(out, &format!("{:?}\n", aes(&v)?))
}
