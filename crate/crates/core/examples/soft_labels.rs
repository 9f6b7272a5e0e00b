//! Soft-bin labels: a score becomes a Gaussian over 40 bins on [0, 3.12] mm/s,
//! the network output is compared with KL divergence, and the expected bin
//! center turns a distribution back into a score.

use headmotion::softbin::{decode, encode, kl_loss, softmax, BinGrid};

fn main() -> headmotion::Result<()> {
    let grid = BinGrid::default();
    println!("{} bins of width {:.3} on [{}, {}]", grid.count, grid.width(), grid.min, grid.max);

    let label = encode(0.73, &grid, grid.width())?;
    let top: Vec<String> = label
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.01)
        .map(|(i, p)| format!("{:.3}:{p:.3}", grid.center(i)))
        .collect();
    println!("label for 0.73 mm/s: {}", top.join(" "));
    println!("decoded back: {:.4}", decode(&label, &grid));

    // a flat network output versus the label
    let flat = softmax(&vec![0.0; grid.count]);
    let (loss, grad) = kl_loss(&label, &flat)?;
    println!("flat prediction: decodes to {:.3}, KL {loss:.3}", decode(&flat, &grid));
    let steepest = grad
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| grid.center(i))
        .unwrap_or_default();
    println!("logit gradient p − t pushes hardest toward {steepest:.3} mm/s");
    Ok(())
}
