use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::softbin::BinGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Batch,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// N(0, 2 / fan_in)
    HeNormal,
    /// U(±sqrt(6 / (fan_in + fan_out)))
    XavierUniform,
}

/// What the last layer produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Softmax over prototype bins.
    SoftBins { bins: usize },
    /// Single output read directly as mm/s (no softmax).
    Scalar,
}

impl OutputHead {
    pub fn width(&self) -> usize {
        match self {
            OutputHead::SoftBins { bins } => *bins,
            OutputHead::Scalar => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub block_channels: Vec<usize>,
    pub head_channels: usize,
    pub output: OutputHead,
    pub dropout_rate: f64,
    pub norm: Norm,
    pub init: Init,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetConfig {
    /// Four blocks, small enough for CPU training on 32³ inputs.
    pub fn desk() -> Self {
        Self {
            block_channels: vec![8, 16, 32, 64],
            head_channels: 64,
            output: OutputHead::SoftBins { bins: 40 },
            dropout_rate: 0.5,
            norm: Norm::None,
            init: Init::HeNormal,
            seed: 0,
        }
    }

    /// Channel widths of the brain-age SFCN.
    pub fn sfcn() -> Self {
        Self {
            block_channels: vec![32, 64, 128, 256, 256, 64],
            norm: Norm::Batch,
            ..Self::desk()
        }
    }

    pub fn pool_stages(&self) -> usize {
        self.block_channels.len()
    }

    /// Input extents are zero-padded up to a multiple of this.
    pub fn spatial_multiple(&self) -> usize {
        1 << self.pool_stages()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_channels.is_empty() || self.block_channels.contains(&0) {
            return Err(Error::Config(
                "need at least one convolution block with nonzero channels".into(),
            ));
        }
        if self.head_channels == 0 || self.output.width() == 0 {
            return Err(Error::Config("head and output widths must be positive".into()));
        }
        if let OutputHead::SoftBins { bins } = self.output {
            if bins < 2 {
                return Err(Error::Config("soft-bin head needs at least 2 bins".into()));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SoftbinKl,
    Mse,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::SoftbinKl => "softbin_kl",
            LossKind::Mse => "mse",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softbin_kl" | "kl" => Ok(LossKind::SoftbinKl),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::Config(format!(
                "unknown loss {other:?} (softbin_kl, mse)"
            ))),
        }
    }
}

/// Loss with everything needed to evaluate it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    pub grid: BinGrid,
    /// Soft-label width in mm/s (KL only).
    pub sigma: f64,
}

impl Loss {
    pub fn softbin(grid: BinGrid) -> Self {
        Self {
            kind: LossKind::SoftbinKl,
            sigma: grid.width(),
            grid,
        }
    }

    pub fn output_head(&self) -> OutputHead {
        match self.kind {
            LossKind::SoftbinKl => OutputHead::SoftBins {
                bins: self.grid.count,
            },
            LossKind::Mse => OutputHead::Scalar,
        }
    }
}

/// Which manifest label the network regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    MotionScore,
    Drift,
    Breathing,
    Noisy,
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motion_score" | "motion" => Ok(Target::MotionScore),
            "drift" => Ok(Target::Drift),
            "breathing" => Ok(Target::Breathing),
            "noisy" => Ok(Target::Noisy),
            other => Err(Error::Config(format!("unknown target {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    /// Required by both losses: KL encodes labels on it, MSE clamps its labels to it.
    pub grid: Option<BinGrid>,
    /// Soft-label width; defaults to one bin width.
    pub sigma: Option<f64>,
    pub target: Target,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            max_steps: None,
            batch_size: 2,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossKind::SoftbinKl,
            grid: Some(BinGrid::default()),
            sigma: None,
            target: Target::MotionScore,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Config(
                "epochs, batch size and learning rate must be positive".into(),
            ));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        self.resolved_loss().map(|_| ())
    }

    pub fn resolved_loss(&self) -> Result<Loss> {
        let grid = self.grid.ok_or_else(|| {
            Error::Config(format!("loss {} needs a soft-bin grid, but none is set", self.loss))
        })?;
        grid.validate()?;
        let sigma = self.sigma.unwrap_or_else(|| grid.width());
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Loss {
            kind: self.loss,
            grid,
            sigma,
        })
    }
}
