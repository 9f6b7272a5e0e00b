use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < min {
        return Err(Error::TooFewValues {
            needed: min,
            got: a.len(),
        });
    }
    if let Some(v) = a.iter().chain(b).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("metric input {v}")));
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantInput("r2 ground truth"));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` if either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValue {
    /// Two-sided Student-t approximation with n − 2 degrees of freedom.
    #[default]
    TApprox,
    /// Exact two-sided permutation test; only for n ≤ 10.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

/// Spearman's ρ alone, for callers that only rank.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(spearman(x, y)?.rho)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    spearman_with(x, y, PValue::TApprox)
}

pub fn spearman_with(x: &[f64], y: &[f64], method: PValue) -> Result<Correlation> {
    check_pair(x, y, 3)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry).ok_or(Error::ConstantInput("spearman input"))?;
    let n = x.len();
    let p = match method {
        PValue::TApprox => t_test_p(rho, n),
        PValue::Exact => {
            if n > 10 {
                return Err(Error::Config(format!(
                    "exact permutation p-value is limited to n <= 10, got {n}"
                )));
            }
            permutation_p(&rx, &ry, rho)
        }
    };
    Ok(Correlation { rho, p, n })
}

fn t_test_p(rho: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Fraction of all orderings of `ry` whose |ρ| reaches the observed one.
fn permutation_p(rx: &[f64], ry: &[f64], rho: f64) -> f64 {
    let target = rho.abs() - 1e-12;
    let mut perm = ry.to_vec();
    let n = perm.len();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut count = |p: &[f64]| {
        total += 1;
        if pearson(rx, p).is_some_and(|r| r.abs() >= target) {
            hits += 1;
        }
    };
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    count(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            count(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::ConstantInput("regression predictor"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn r2_cases() {
        assert_eq!(r2(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(r2(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((r2(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(r2(&[1.0, 1.0], &[0.0, 2.0]), Err(Error::ConstantInput(_))));
        assert!(r2(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [2.0, 4.0, 8.0, 16.0, 32.0];
        let down = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&a, &up).unwrap().rho, 1.0);
        assert_eq!(spearman(&a, &down).unwrap().rho, -1.0);
        assert_eq!(spearman(&a, &up).unwrap().p, 0.0);
        assert!(matches!(spearman(&a, &[1.0; 5]), Err(Error::ConstantInput(_))));
        assert!(spearman(&a[..2], &up[..2]).is_err());
    }

    #[test]
    fn exact_p_for_perfect_order() {
        // only the identity and the full reversal reach |ρ| = 1 among 5! orderings
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let c = spearman_with(&a, &a, PValue::Exact).unwrap();
        assert!((c.p - 2.0 / 120.0).abs() < 1e-15);
        assert!(spearman_with(&[0.0; 11], &[0.0; 11], PValue::Exact).is_err());
    }

    #[test]
    fn t_approximation_known_value() {
        // ρ = 0.5, n = 12: t = 0.5·sqrt(10/0.75) = 1.8257, two-sided p ≈ 0.0979
        let p = t_test_p(0.5, 12);
        assert!((p - 0.0979).abs() < 5e-4, "{p}");
    }

    #[test]
    fn line_fit() {
        let (m, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn spearman_is_monotone_invariant(v in proptest::collection::vec(-100i32..100, 3..30), w in proptest::collection::vec(-100i32..100, 30)) {
            let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            let y: Vec<f64> = w[..x.len()].iter().map(|&a| a as f64).collect();
            if let Ok(c) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|a| (a / 50.0).exp()).collect();
                let ty: Vec<f64> = y.iter().map(|a| a * 3.0 - 7.0).collect();
                prop_assert_eq!(spearman(&tx, &ty).unwrap().rho, c.rho);
                prop_assert!((-1.0..=1.0).contains(&c.rho));
                prop_assert!((0.0..=1.0).contains(&c.p));
            }
        }

        #[test]
        fn r2_at_most_one(v in proptest::collection::vec(-10.0f64..10.0, 2..20), s in any::<u64>()) {
            let yhat: Vec<f64> = v.iter().enumerate().map(|(i, a)| a + ((s >> (i % 60)) & 3) as f64).collect();
            if let Ok(r) = r2(&v, &yhat) {
                prop_assert!(r <= 1.0);
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                prop_assert_eq!(r2(&v, &vec![mean; v.len()]).unwrap(), 0.0);
            }
        }
    }
}
