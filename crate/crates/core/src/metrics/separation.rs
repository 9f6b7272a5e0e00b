use super::correlation::average_ranks;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// Scores strictly above the threshold are called positive.
    pub threshold: f64,
    pub accuracy: f64,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann–Whitney rank statistic (ties count
/// one half). Positives are expected to score higher.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let (pos, neg) = class_counts(labels)?;
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

fn accuracy_at(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s > threshold) == l)
        .count();
    correct as f64 / scores.len() as f64
}

/// Best accuracy threshold and AUC. Candidate thresholds are the midpoints
/// between consecutive distinct scores plus one below the minimum; among
/// equally accurate candidates the one between the closest-ranked pair of
/// opposite-class scores with the widest gap wins.
pub fn threshold_separation(scores: &[f64], labels: &[bool]) -> Result<Separation> {
    let auc = auc(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let lowest = scores[order[0]];
    let mut best = (accuracy_at(scores, labels, lowest - 1.0), false, 0.0, lowest - 1.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        if j + 1 < order.len() {
            let (lo, hi) = (scores[order[j]], scores[order[j + 1]]);
            let t = 0.5 * (lo + hi);
            let below: Vec<bool> = order[i..=j].iter().map(|&k| labels[k]).collect();
            let mut k = j + 1;
            while k + 1 < order.len() && scores[order[k + 1]] == hi {
                k += 1;
            }
            let above: Vec<bool> = order[j + 1..=k].iter().map(|&m| labels[m]).collect();
            let cross = below.iter().any(|&l| !l) && above.iter().any(|&l| l);
            let cand = (accuracy_at(scores, labels, t), cross, hi - lo, t);
            if cand.0 > best.0
                || (cand.0 == best.0 && (cand.1, cand.2) > (best.1, best.2))
            {
                best = cand;
            }
        }
        i = j + 1;
    }
    Ok(Separation {
        threshold: best.3,
        accuracy: best.0,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn perfect_and_degenerate() {
        let s = [0.1, 0.2, 0.9, 1.0];
        let l = [false, false, true, true];
        let sep = threshold_separation(&s, &l).unwrap();
        assert_eq!((sep.accuracy, sep.auc), (1.0, 1.0));
        assert!((sep.threshold - 0.55).abs() < 1e-15);
        assert_eq!(auc(&[0.5; 4], &l).unwrap(), 0.5);
        assert!(matches!(auc(&s, &[true; 4]), Err(Error::SingleClass)));
    }

    #[test]
    fn threshold_matches_exhaustive_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.random_range(4..25);
            let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0 || rng.random_bool(0.3)).collect();
            if labels.iter().all(|&l| l) {
                continue;
            }
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect();
            let sep = threshold_separation(&scores, &labels).unwrap();
            let mut cands: Vec<f64> = scores.clone();
            cands.push(-1.0);
            let brute = cands
                .iter()
                .map(|&t| accuracy_at(&scores, &labels, t))
                .fold(0.0, f64::max);
            assert_eq!(sep.accuracy, brute);
            assert_eq!(accuracy_at(&scores, &labels, sep.threshold), sep.accuracy);
        }
    }
}
