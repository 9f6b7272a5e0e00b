//! Evaluation metrics: R² and Spearman's ρ against labels, two-class
//! separation, and a covariate correlation read from a manifest.

use headmotion::metrics::{correlate_covariate, spearman_with, threshold_separation, EvalReport, PValue};
use headmotion::volume_io::{DatasetManifest, ManifestEntry, Split};

fn main() -> headmotion::Result<()> {
    let truth = [0.1, 0.25, 0.4, 0.4, 0.9, 1.2, 1.3];
    let predicted = [0.2, 0.2, 0.35, 0.5, 0.8, 1.0, 1.4];
    let report = EvalReport::compute(&truth, &predicted)?;
    print!("{}", report.to_csv());

    // small samples can use the exact permutation p-value
    let exact = spearman_with(&truth, &predicted, PValue::Exact)?;
    println!("exact p for ρ = {:.3}: {:.4}", exact.rho, exact.p);

    let labels: Vec<bool> = truth.iter().map(|&t| t > 0.6).collect();
    let sep = threshold_separation(&predicted, &labels)?;
    println!(
        "separation: threshold {:.3}, accuracy {:.2}, AUC {:.2}",
        sep.threshold, sep.accuracy, sep.auc
    );

    let entries = truth
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut e = ManifestEntry::new(format!("sub{i}.nii.gz"), Split::Test);
            e.motion_score = Some(t);
            e.covariates.insert("age".into(), 30.0 + 25.0 * t + (i % 3) as f64);
            e
        })
        .collect();
    let manifest = DatasetManifest::new(entries)?;
    let scored: Vec<(String, f64)> = manifest
        .entries
        .iter()
        .zip(predicted)
        .map(|(e, p)| (e.volume.clone(), p))
        .collect();
    let c = correlate_covariate(&scored, "age", &manifest)?;
    println!(
        "age vs predicted score: ρ {:.3}, p {:.1e}, age ≈ {:.1} + {:.1}·score",
        c.rho, c.p, c.intercept, c.slope
    );
    Ok(())
}
