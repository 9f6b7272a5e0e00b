//! Head-motion estimation for structural MRI.
//!
//! Motion scores come from camera tracking logs (Jenkinson differences
//! between consecutive poses, averaged over a sequence window) and can be
//! split into drift, breathing and noisy bands. A small 3-D convolutional
//! network learns to predict the score from the image alone.

pub mod bandsplit;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod network;
pub mod preprocess;
pub mod rigid_motion;
pub mod simulate;
pub mod softbin;
pub mod volume_io;

pub use error::{Error, ErrorKind, Result};
