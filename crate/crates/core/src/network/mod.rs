//! Fully convolutional 3-D regressor with hand-written gradients and an
//! Adam training loop.

mod adam;
mod checkpoint;
mod config;
pub mod layers;
mod model;
mod params;
mod train;

pub use adam::Adam;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{Init, Loss, LossKind, NetConfig, Norm, OutputHead, Target, TrainConfig};
pub use layers::Tensor;
pub use model::{backward, decode_output, forward, loss_and_grad, Cache, Mode, Output};
pub use params::{Grads, Layout, Param, Params};
pub use train::{
    eval_loss, fit, fit_samples, load_prepared, load_split, mask_path, target_of, to_tensor,
    write_loss_log, EpochLog, Model, Sample, LOSS_LOG_HEADER,
};
