use crate::error::{Error, Result};
use crate::volume_io::Volume;

const OTSU_BINS: usize = 256;

/// Otsu threshold on a 256-bin histogram over `[0, max]`. Values strictly
/// above the returned threshold form the upper class.
fn otsu(values: &[f64], max: f64) -> f64 {
    let width = max / OTSU_BINS as f64;
    let mut hist = [0u64; OTSU_BINS];
    for &v in values {
        hist[((v / width) as usize).min(OTSU_BINS - 1)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_k) = (-1.0, 0usize);
    for (k, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let between = w0 * w1 * (sum0 / w0 - (sum_all - sum0) / w1).powi(2);
        if between > best {
            best = between;
            best_k = k;
        }
    }
    (best_k + 1) as f64 * width
}

/// In-plane central-difference gradient magnitude on interior pixels of one
/// axial slice.
fn slice_gradient(v: &Volume, z: usize) -> Vec<f64> {
    let [nx, ny, _] = v.dims();
    let mut out = Vec::with_capacity(nx.saturating_sub(2) * ny.saturating_sub(2));
    for y in 1..ny.saturating_sub(1) {
        for x in 1..nx.saturating_sub(1) {
            let gx = (v.get(x + 1, y, z) as f64 - v.get(x - 1, y, z) as f64) / 2.0;
            let gy = (v.get(x, y + 1, z) as f64 - v.get(x, y - 1, z) as f64) / 2.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Average edge strength: per axial slice, the mean gradient magnitude over
/// Otsu-selected edge pixels; averaged over slices that have edges.
pub fn aes(v: &Volume) -> Result<f64> {
    let nz = v.dims()[2];
    let mut per_slice = Vec::new();
    for z in 0..nz {
        let g = slice_gradient(v, z);
        let max = g.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        let min = g.iter().copied().fold(f64::INFINITY, f64::min);
        let edges: Vec<f64> = if min == max {
            g
        } else {
            let t = otsu(&g, max);
            g.into_iter().filter(|&m| m > t).collect()
        };
        if !edges.is_empty() {
            per_slice.push(edges.iter().sum::<f64>() / edges.len() as f64);
        }
    }
    if per_slice.is_empty() {
        return Err(Error::NoEdges);
    }
    Ok(per_slice.iter().sum::<f64>() / per_slice.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::Modality;

    #[test]
    fn uniform_volume_has_no_edges() {
        let v = Volume::new([5, 5, 3], [1.0; 3], vec![7; 75], Modality::T1).unwrap();
        assert!(matches!(aes(&v), Err(Error::NoEdges)));
    }

    #[test]
    fn step_edge_is_half_height() {
        let (nx, ny, nz) = (10, 6, 4);
        let data = (0..nx * ny * nz)
            .map(|i| if i % nx >= 5 { 100 } else { 0 })
            .collect();
        let v = Volume::new([nx, ny, nz], [1.0; 3], data, Modality::T1).unwrap();
        assert!((aes(&v).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn otsu_splits_two_clusters() {
        let mut vals = vec![1.0; 50];
        vals.extend(vec![9.0; 50]);
        let t = otsu(&vals, 9.0);
        assert!(t > 1.0 && t < 9.0, "{t}");
    }
}
