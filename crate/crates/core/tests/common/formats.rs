//! Write→read→write checks for every on-disk format, and malformed files
//! that must be rejected with a specific error variant.

use std::path::Path;

use headmotion::network::{encode_checkpoint, load_checkpoint, save_checkpoint, Loss, LossKind, Model, NetConfig, Norm, Target};
use headmotion::preprocess::Preprocess;
use headmotion::rigid_motion::SequenceWindow;
use headmotion::simulate::{make_phantom, synth_trajectory, TrajectorySpec};
use headmotion::softbin::BinGrid;
use headmotion::volume_io::{
    read_manifest, read_nifti, read_tracking_log, write_manifest, write_nifti, write_tracking_log, DatasetManifest,
    ManifestEntry, Modality, Split, Volume,
};
use headmotion::Error;

fn same_file(a: &Path, b: &Path) -> Result<(), String> {
    let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
    if x != y {
        return Err(format!("{} and {} differ", a.display(), b.display()));
    }
    Ok(())
}

fn check(ok: bool, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

/// Round-trips a volume of each modality (plain and gzip), a tracking log,
/// a manifest and two checkpoints. Returns the number of files checked.
pub fn round_trips(dir: &Path) -> Result<usize, String> {
    let e = |err: Error| err.to_string();
    let mut files = 0;
    for (i, modality) in [Modality::T1, Modality::T2, Modality::Flair, Modality::Synthetic].into_iter().enumerate() {
        let p = make_phantom([16, 20, 18], [0.8, 1.0, 1.2], i as u64).map_err(e)?;
        let v = Volume::new(p.dims(), p.voxel_size(), p.data().to_vec(), modality).map_err(e)?;
        for name in [format!("v{i}.nii"), format!("v{i}.nii.gz")] {
            let path = dir.join(&name);
            write_nifti(&v, &path).map_err(e)?;
            let back = read_nifti(&path).map_err(e)?;
            check(back == v, &format!("{name}: volume changed"))?;
            let again = dir.join(format!("again_{name}"));
            write_nifti(&back, &again).map_err(e)?;
            same_file(&path, &again)?;
            files += 1;
        }
    }

    let spec = TrajectorySpec {
        start: 12.5,
        drift_rate: [0.01, -0.02, 0.005],
        breathing_amplitude: 0.7,
        jitter_sd: 0.05,
        rotation_drift_rate: [0.01, 0.0, -0.01],
        breathing_rotation_amplitude: 0.3,
        jitter_rotation_sd: 0.02,
        seed: 11,
        ..Default::default()
    };
    let traj = synth_trajectory(&spec).map_err(e)?;
    let log = dir.join("log.csv");
    write_tracking_log(&traj, &log).map_err(e)?;
    let back = read_tracking_log(&log).map_err(e)?;
    check(back == traj, "tracking log: trajectory changed")?;
    write_tracking_log(&back, dir.join("log2.csv")).map_err(e)?;
    same_file(&log, &dir.join("log2.csv"))?;
    files += 1;

    let mut entries = Vec::new();
    for i in 0..5 {
        let mut entry = ManifestEntry::new(format!("scans/s{i}.nii.gz"), [Split::Train, Split::Validation, Split::Test][i % 3]);
        if i != 2 {
            entry.log = Some(format!("logs/s{i}.csv"));
            entry.window = Some(SequenceWindow::new(10.0 + i as f64 / 3.0, 70.0 + i as f64 / 7.0, -0.1 * i as f64).map_err(e)?);
        }
        entry.motion_score = Some(0.1 + i as f64 / 9.0);
        if i % 2 == 0 {
            entry.drift = Some(0.01 * i as f64);
            entry.breathing = Some(0.3 / (i + 1) as f64);
            entry.noisy = Some(1e-3);
        }
        entry.covariates.insert("age".into(), 20.5 + i as f64);
        entries.push(entry);
    }
    let manifest = DatasetManifest::new(entries).map_err(e)?;
    let mpath = dir.join("manifest.csv");
    write_manifest(&manifest, &mpath).map_err(e)?;
    let back = read_manifest(&mpath).map_err(e)?;
    check(back.entries == manifest.entries, "manifest: entries changed")?;
    write_manifest(&back, dir.join("manifest2.csv")).map_err(e)?;
    same_file(&mpath, &dir.join("manifest2.csv"))?;
    files += 1;

    for (i, (loss, norm)) in [(LossKind::SoftbinKl, Norm::Batch), (LossKind::Mse, Norm::None)].into_iter().enumerate() {
        let loss = Loss {
            kind: loss,
            ..Loss::softbin(BinGrid::default())
        };
        let net = NetConfig {
            block_channels: vec![2, 4],
            head_channels: 3,
            output: loss.output_head(),
            norm,
            seed: i as u64,
            ..NetConfig::desk()
        };
        let model = Model::new(net, loss, Preprocess::Robust, Target::Breathing).map_err(e)?;
        let path = dir.join(format!("m{i}.ckpt"));
        save_checkpoint(&path, &model).map_err(e)?;
        let back = load_checkpoint(&path).map_err(e)?;
        check(back == model, "checkpoint: model changed")?;
        check(
            encode_checkpoint(&back).map_err(e)? == std::fs::read(&path).map_err(|x| x.to_string())?,
            "checkpoint: re-encoding differs",
        )?;
        files += 1;
    }
    Ok(files)
}

fn expect(name: &str, got: Result<impl std::fmt::Debug, Error>, ok: impl Fn(&Error) -> bool) -> Result<(), String> {
    match got {
        Err(err) if ok(&err) => Ok(()),
        Err(err) => Err(format!("{name}: wrong error {err:?}")),
        Ok(v) => Err(format!("{name}: accepted ({v:?})")),
    }
}

/// Writes broken files of every format and checks each is rejected with the
/// expected error. Returns the number of fixtures.
pub fn malformed_fixtures(dir: &Path) -> Result<usize, String> {
    let vol = make_phantom([16; 3], [1.0; 3], 0).map_err(|x| x.to_string())?;
    let good = dir.join("good.nii");
    write_nifti(&vol, &good).map_err(|x| x.to_string())?;
    let bytes = std::fs::read(&good).map_err(|x| x.to_string())?;
    let mut n = 0;
    let mut nifti = |name: &str, edit: &dyn Fn(&mut Vec<u8>), field: Option<&str>| -> Result<(), String> {
        let mut b = bytes.clone();
        edit(&mut b);
        let path = dir.join(name);
        std::fs::write(&path, b).map_err(|x| x.to_string())?;
        n += 1;
        expect(name, read_nifti(&path), |err| match (err, field) {
            (Error::Nifti { field: f, .. }, Some(want)) => *f == want,
            (Error::UnsupportedDatatype { code: 2, .. }, None) => true,
            _ => false,
        })
    };
    nifti("magic.nii", &|b| b[344..348].copy_from_slice(b"abc\0"), Some("magic"))?;
    nifti("sizeof.nii", &|b| b[0..4].copy_from_slice(&100i32.to_le_bytes()), Some("sizeof_hdr"))?;
    nifti("uint8.nii", &|b| {
        b[70..72].copy_from_slice(&2i16.to_le_bytes());
        b[72..74].copy_from_slice(&8i16.to_le_bytes());
    }, None)?;
    nifti("truncated.nii", &|b| b.truncate(b.len() - 10), Some("data"))?;
    nifti("fourd.nii", &|b| {
        b[40..42].copy_from_slice(&4i16.to_le_bytes());
        b[48..50].copy_from_slice(&2i16.to_le_bytes());
    }, Some("dim"))?;
    nifti("zero_dim.nii", &|b| b[44..46].copy_from_slice(&0i16.to_le_bytes()), Some("dim"))?;
    std::fs::write(dir.join("notgz.nii.gz"), b"plain text").map_err(|x| x.to_string())?;
    expect("notgz.nii.gz", read_nifti(dir.join("notgz.nii.gz")), |e| matches!(e, Error::Nifti { field: "gzip", .. }))?;
    n += 1;

    let header = "t,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n";
    let ident = |t: f64| format!("{t},1,0,0,0,0,1,0,0,0,0,1,0\n");
    let mut tracking = |name: &str, text: String, ok: &dyn Fn(&Error) -> bool| -> Result<(), String> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|x| x.to_string())?;
        n += 1;
        expect(name, read_tracking_log(&path), ok)
    };
    tracking("shuffled.csv", format!("{header}{}{}{}", ident(0.0), ident(0.2), ident(0.1)), &|e| {
        matches!(e, Error::NonMonotonic { row: 3, .. })
    })?;
    tracking(
        "reflection.csv",
        format!("{header}{}{}0.2,-1,0,0,0,0,1,0,0,0,0,1,0\n", ident(0.0), ident(0.1)),
        &|e| matches!(e, Error::TrackingLog { row: 3, .. }),
    )?;
    tracking("header.csv", format!("time,a,b\n{}", ident(0.0)), &|e| matches!(e, Error::TrackingLog { .. }))?;
    tracking("garbage.csv", format!("{header}{}0.1,1,0,0,x,0,1,0,0,0,0,1,0\n", ident(0.0)), &|e| {
        matches!(e, Error::TrackingLog { row: 2, .. })
    })?;

    let mheader = "volume,log,window_start,window_end,clock_offset,motion_score,drift,breathing,noisy,age,split\n";
    let mut manifest = |name: &str, body: &str, ok: &dyn Fn(&Error) -> bool| -> Result<(), String> {
        let path = dir.join(name);
        std::fs::write(&path, format!("{mheader}{body}")).map_err(|x| x.to_string())?;
        n += 1;
        expect(name, read_manifest(&path), ok)
    };
    manifest("dup.csv", "a.nii,,,,,0.1,,,,,train\na.nii,,,,,0.2,,,,,test\n", &|e| {
        matches!(e, Error::DuplicateVolume(v) if v == "a.nii")
    })?;
    manifest("split.csv", "a.nii,,,,,0.1,,,,,holdout\n", &|e| {
        matches!(e, Error::UnknownSplit(s) if s == "holdout")
    })?;
    manifest("number.csv", "a.nii,,,,,fast,,,,,train\n", &|e| matches!(e, Error::Manifest { row: 1, .. }))?;

    let model = Model::new(
        NetConfig {
            block_channels: vec![2],
            head_channels: 2,
            ..NetConfig::desk()
        },
        Loss::softbin(BinGrid::default()),
        Preprocess::Lsb8,
        Target::MotionScore,
    )
    .map_err(|x| x.to_string())?;
    let ckpt = encode_checkpoint(&model).map_err(|x| x.to_string())?;
    let mut checkpoint = |name: &str, b: Vec<u8>, ok: &dyn Fn(&Error) -> bool| -> Result<(), String> {
        let path = dir.join(name);
        std::fs::write(&path, b).map_err(|x| x.to_string())?;
        n += 1;
        expect(name, load_checkpoint(&path), ok)
    };
    let mut flipped = ckpt.clone();
    flipped[40] ^= 1;
    checkpoint("flipped.ckpt", flipped, &|e| matches!(e, Error::ChecksumMismatch(_)))?;
    let mut magic = ckpt.clone();
    magic[0] = b'X';
    checkpoint("magic.ckpt", magic, &|e| matches!(e, Error::Checkpoint { .. }))?;
    checkpoint("short.ckpt", ckpt[..20].to_vec(), &|e| matches!(e, Error::Checkpoint { .. }))?;

    Ok(n)
}
