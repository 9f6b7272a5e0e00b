//! Evaluation metrics: R², Spearman's ρ, average edge strength, covariate
//! correlation and two-class threshold separation.

mod aes;
mod correlation;
mod separation;

use std::path::Path;

pub use aes::aes;
pub use correlation::{
    average_ranks, linear_fit, pearson, r2, spearman, spearman_rho, spearman_with, Correlation, PValue,
};
pub use separation::{auc, threshold_separation, Separation};

use crate::error::{Error, Result};
use crate::volume_io::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub r2: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
    pub n: usize,
}

pub const REPORT_HEADER: &str = "metric,value,n,p_value";

impl EvalReport {
    /// `truth` first, as in `r2(y, yhat)`.
    pub fn compute(truth: &[f64], predicted: &[f64]) -> Result<Self> {
        let c = spearman(truth, predicted)?;
        Ok(Self {
            r2: r2(truth, predicted)?,
            spearman_rho: c.rho,
            spearman_p: c.p,
            n: c.n,
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{REPORT_HEADER}\nr2,{},{},\nspearman,{},{},{}\n",
            self.r2, self.n, self.spearman_rho, self.n, self.spearman_p
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariateCorrelation {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
    /// Least-squares line of the covariate against the scores.
    pub slope: f64,
    pub intercept: f64,
}

/// Spearman correlation of `(volume, score)` pairs against a manifest
/// covariate. Every scored volume must carry the covariate.
pub fn correlate_covariate(
    scores: &[(String, f64)],
    covariate: &str,
    manifest: &DatasetManifest,
) -> Result<CovariateCorrelation> {
    let mut missing = Vec::new();
    let mut xs = Vec::with_capacity(scores.len());
    let mut ys = Vec::with_capacity(scores.len());
    for (volume, score) in scores {
        match manifest.find(volume).and_then(|e| e.covariate(covariate)) {
            Some(c) => {
                xs.push(*score);
                ys.push(c);
            }
            None => missing.push(volume.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCovariate {
            name: covariate.to_string(),
            paths: missing,
        });
    }
    let c = spearman(&xs, &ys)?;
    let (slope, intercept) = linear_fit(&xs, &ys)?;
    Ok(CovariateCorrelation {
        rho: c.rho,
        p: c.p,
        n: c.n,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_csv_layout() {
        let r = EvalReport::compute(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines[1], "r2,0.5,3,");
        assert!(lines[2].starts_with("spearman,"));
    }
}
