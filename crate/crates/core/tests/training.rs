use std::time::Instant;

use headmotion::network::{fit, fit_samples, write_loss_log, NetConfig, Sample, TrainConfig};
use headmotion::simulate::{build_dataset, DatasetSpec};
use headmotion::volume_io::Split;
use headmotion::Error;
use headmotion::preprocess::{AugmentConfig, Preprocess};

mod common;
use common::corrupted;

/// Four volumes, 500 optimizer steps: the network must memorize them.
#[test]
fn four_volumes_are_memorized() {
    let targets = [0.2, 0.6, 1.0, 1.4];
    let samples: Vec<Sample> = targets
        .iter()
        .enumerate()
        .map(|(i, &t)| Sample {
            id: format!("v{i}"),
            volume: corrupted(i as u64, t),
            target: t,
        })
        .collect();
    let net = NetConfig {
        dropout_rate: 0.0,
        seed: 1,
        ..NetConfig::desk()
    };
    let train = TrainConfig {
        epochs: 250,
        seed: 1,
        ..Default::default()
    };
    let start = Instant::now();
    let (_, log) = fit_samples(&samples, &samples, &net, &train, Preprocess::Lsb8, &AugmentConfig::identity()).unwrap();
    let last = log.last().unwrap();
    eprintln!("{:?} after {:?}", last, start.elapsed());
    assert!(last.train_loss < 0.05, "final KL {}", last.train_loss);
}

fn small_dataset(dir: &std::path::Path, seed: u64) -> headmotion::volume_io::DatasetManifest {
    let spec = DatasetSpec {
        count: 7,
        dims: [16; 3],
        segments: 8,
        split_counts: Some([4, 3, 0]),
        seed,
        ..Default::default()
    };
    build_dataset(&spec, dir).unwrap()
}

#[test]
fn same_seed_gives_identical_loss_logs() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_dataset(dir.path(), 2);
    let train = TrainConfig {
        epochs: 3,
        seed: 5,
        ..Default::default()
    };
    let aug = AugmentConfig {
        seed: 5,
        ..Default::default()
    };
    let run = || fit(&m, &NetConfig::desk(), &train, Preprocess::Lsb8, &aug).unwrap();
    let (a, la) = run();
    let (b, lb) = run();
    let text = |log: &[headmotion::network::EpochLog]| {
        let path = dir.path().join("log.csv");
        write_loss_log(&path, log).unwrap();
        std::fs::read_to_string(path).unwrap()
    };
    assert_eq!(text(&la), text(&lb));
    assert!(la.iter().all(|e| e.val_spearman.is_finite()));
    assert_eq!(a.params, b.params);
    let other = TrainConfig { seed: 6, ..train.clone() };
    let (_, lc) = fit(&m, &NetConfig::desk(), &other, Preprocess::Lsb8, &aug).unwrap();
    assert_ne!(text(&la), text(&lc));
}

#[test]
fn manifest_without_validation_split_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = small_dataset(dir.path(), 3);
    for e in &mut m.entries {
        e.split = Split::Train;
    }
    let err = fit(&m, &NetConfig::desk(), &TrainConfig::default(), Preprocess::Lsb8, &AugmentConfig::identity()).unwrap_err();
    assert!(matches!(err, Error::EmptySplit("validation")), "{err}");

    m.entries[0].split = Split::Validation;
    m.entries[1].motion_score = None;
    let err = fit(&m, &NetConfig::desk(), &TrainConfig::default(), Preprocess::Lsb8, &AugmentConfig::identity()).unwrap_err();
    assert!(matches!(err, Error::MissingLabel(ref v) if v == "vol_0001.nii.gz"), "{err}");
}
