//! Training the motion-score network on a small synthetic set, saving a
//! checkpoint and scoring a held-out volume with the reloaded model.
//!
//! This is a short demonstration run (60 volumes of 16³, 40 epochs); use the
//! command-line tool for real training.

use headmotion::network::{fit, load_checkpoint, mask_path, save_checkpoint, write_loss_log, NetConfig, TrainConfig};
use headmotion::preprocess::{AugmentConfig, Preprocess};
use headmotion::simulate::{build_dataset, DatasetSpec};
use headmotion::volume_io::{read_nifti, Split};

fn main() -> headmotion::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let spec = DatasetSpec {
        count: 60,
        dims: [16; 3],
        segments: 16,
        split_counts: Some([44, 8, 8]),
        seed: 2,
        ..Default::default()
    };
    let manifest = build_dataset(&spec, dir.path())?;

    let net = NetConfig {
        block_channels: vec![4, 8, 16],
        head_channels: 16,
        ..NetConfig::desk()
    };
    let train = TrainConfig {
        epochs: 40,
        seed: 2,
        ..Default::default()
    };
    let (model, log) = fit(&manifest, &net, &train, Preprocess::Lsb8, &AugmentConfig::default())?;
    for e in &log {
        println!(
            "epoch {:>2}: train {:.4}  val {:.4}  ρ {:.3}",
            e.epoch, e.train_loss, e.val_loss, e.val_spearman
        );
    }
    write_loss_log(&dir.path().join("loss_log.csv"), &log)?;

    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&ckpt, &model)?;
    let model = load_checkpoint(&ckpt)?;

    for entry in manifest.split(Split::Test) {
        let path = manifest.resolve(&entry.volume);
        let volume = read_nifti(&path)?;
        let mask = read_nifti(mask_path(&path)).ok();
        let predicted = model.predict(&volume, mask.as_ref())?;
        println!(
            "{}: predicted {:.3}, true {:.3} mm/s",
            entry.volume,
            predicted.value(),
            entry.motion_score.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
