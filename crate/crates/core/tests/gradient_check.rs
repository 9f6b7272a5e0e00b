mod common;

use common::{gradient_check, random_input};
use headmotion::network::{Loss, LossKind, NetConfig, Norm, OutputHead, Params};
use headmotion::softbin::BinGrid;

fn tiny(norm: Norm, output: OutputHead) -> NetConfig {
    NetConfig {
        block_channels: vec![3, 4],
        head_channels: 5,
        output,
        dropout_rate: 0.25,
        norm,
        seed: 3,
        ..NetConfig::desk()
    }
}

#[test]
fn softbin_network_gradients_match_finite_differences() {
    let loss = Loss::softbin(BinGrid::default());
    for norm in [Norm::None, Norm::Batch] {
        let cfg = tiny(norm, OutputHead::SoftBins { bins: 40 });
        assert!(Params::init(&cfg).unwrap().count() <= 5000);
        let r = gradient_check(&cfg, &loss, &random_input(2, 8, 1), &[0.4, 1.9], 1e-4);
        println!("{norm:?}: {r:?}");
        assert_eq!(r.failures, 0, "{r:?}");
        assert!(r.checked > 100);
    }
}

#[test]
fn scalar_head_gradients_match_finite_differences() {
    let loss = Loss {
        kind: LossKind::Mse,
        ..Loss::softbin(BinGrid::default())
    };
    let cfg = tiny(Norm::None, OutputHead::Scalar);
    let r = gradient_check(&cfg, &loss, &random_input(2, 8, 2), &[0.4, 1.9], 1e-4);
    println!("{r:?}");
    assert_eq!(r.failures, 0, "{r:?}");
}
