//! Synthetic training data: phantoms corrupted in k-space by simulated head
//! motion, with tracking logs, band labels, masks and a manifest.
//!
//! ```text
//! cargo run --release --example simulate_dataset -- [OUT_DIR] [COUNT]
//! ```

use headmotion::metrics::spearman;
use headmotion::simulate::{build_dataset, DatasetSpec};

fn main() -> headmotion::Result<()> {
    let mut args = std::env::args().skip(1);
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out = args.next().map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);

    let spec = DatasetSpec {
        count,
        seed: 4,
        ..Default::default()
    };
    let manifest = build_dataset(&spec, &out)?;
    println!("{} items in {}", manifest.entries.len(), out.display());
    for e in manifest.entries.iter().take(5) {
        println!(
            "  {:<18} {:<10} score {:.3}  drift {:.3}  breathing {:.3}  noisy {:.3}",
            e.volume,
            e.split.as_str(),
            e.motion_score.unwrap_or(f64::NAN),
            e.drift.unwrap_or(f64::NAN),
            e.breathing.unwrap_or(f64::NAN),
            e.noisy.unwrap_or(f64::NAN),
        );
    }

    let (scores, ages): (Vec<f64>, Vec<f64>) = manifest
        .entries
        .iter()
        .filter_map(|e| Some((e.motion_score?, e.covariate("age")?)))
        .unzip();
    let c = spearman(&scores, &ages)?;
    println!("planted age covariate: ρ = {:.3} (p = {:.1e})", c.rho, c.p);
    Ok(())
}
