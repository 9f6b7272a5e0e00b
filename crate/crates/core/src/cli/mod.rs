//! Command-line front end: `score`, `simulate`, `train`, `predict`,
//! `evaluate` and `aes`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or malformed input,
//! 3 domain error (for example a volume without edges). Every run records
//! its resolved options: next to its output files when it writes any,
//! otherwise on standard error.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

pub use config::{config_to_args, echo, parse_config};

use crate::error::{Error, ErrorKind, Result};
use crate::network::{LossKind, Target};
use crate::preprocess::Preprocess;
use crate::volume_io::Split;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "HEADMOTION_THREADS";

#[derive(Debug, Parser)]
#[command(name = "headmotion", version, about = "Head-motion scores from tracking logs and MR volumes")]
pub struct Cli {
    /// Flat `key = value` file with defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: $HEADMOTION_THREADS, else all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Motion score (and optional band scores) of a tracking log.
    #[command(args_override_self = true)]
    Score(ScoreArgs),
    /// Generate a synthetic dataset of corrupted phantoms.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Train a network on a dataset manifest.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Predict motion scores with a trained checkpoint.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Compare predictions against labels and covariates.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Average edge strength of a volume.
    #[command(args_override_self = true)]
    Aes(AesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandDomain {
    /// Filter the six pose parameters, then score each band trajectory.
    Pose,
    /// Filter the framewise rate series directly.
    Rate,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Scanner-clock acquisition window; the whole log when omitted.
    #[arg(long, num_args = 2, value_names = ["START", "END"], allow_negative_numbers = true)]
    pub window: Option<Vec<f64>>,
    /// Camera clock minus scanner clock, seconds.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset: f64,
    /// Also emit drift, breathing and noisy band scores.
    #[arg(long)]
    pub bands: bool,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1, value_name = "HZ")]
    pub low: f64,
    #[arg(long, default_value_t = 0.5, value_name = "HZ")]
    pub high: f64,
    /// Sphere radius for the displacement metric, mm.
    #[arg(long, default_value_t = 80.0)]
    pub radius: f64,
    #[arg(long, value_enum, default_value_t = BandDomain::Pose)]
    pub band_domain: BandDomain,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    /// One value for a cube, or three.
    #[arg(long, num_args = 1..=3, default_values_t = [32])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4.0, value_name = "MM")]
    pub voxel: f64,
    #[arg(long, default_value_t = 32)]
    pub segments: usize,
    /// Motion scores are drawn uniformly from [low, high] mm/s.
    #[arg(long, default_value_t = 0.0)]
    pub low: f64,
    #[arg(long, default_value_t = 1.5)]
    pub high: f64,
    /// Alternate items between [0, 0.2] and [0.8, 1.5] mm/s instead.
    #[arg(long)]
    pub two_class: bool,
    /// Train / validation / test counts (default 70/15/15 percent).
    #[arg(long, num_args = 3, value_names = ["TRAIN", "VAL", "TEST"])]
    pub splits: Option<Vec<usize>>,
    /// Planted covariate column, monotone in the score plus noise.
    #[arg(long, default_value = "age")]
    pub covariate: String,
    #[arg(long, default_value_t = 3.0)]
    pub covariate_noise: f64,
    #[arg(long)]
    pub no_masks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NetPreset {
    /// Four narrow blocks for CPU training on 32³ inputs.
    Desk,
    /// Full-width SFCN channels with batch norm.
    Sfcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    None,
    Batch,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    #[arg(long, default_value = "lsb8")]
    pub preprocess: Preprocess,
    #[arg(long, default_value = "softbin_kl")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "motion_score")]
    pub target: Target,
    #[arg(long, value_enum, default_value_t = NetPreset::Desk)]
    pub net: NetPreset,
    #[arg(long, value_enum, default_value_t = NormArg::None)]
    pub norm: NormArg,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.0)]
    pub bin_min: f64,
    #[arg(long, default_value_t = 3.12)]
    pub bin_max: f64,
    #[arg(long, default_value_t = 40)]
    pub bin_count: usize,
    /// Soft-label width in mm/s (default: one bin width).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Train without intensity scaling and flips.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["volume", "manifest"])))]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub volume: Option<PathBuf>,
    /// Head mask for background preprocessing (default: `<stem>_mask.nii.gz`).
    #[arg(long, value_name = "PATH", requires = "volume")]
    pub mask: Option<PathBuf>,
    /// Predict every manifest entry, in manifest order.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub split: Option<Split>,
    /// Write `volume,motion_score` rows here instead of standard output.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "CSV")]
    pub predictions: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Correlate predictions with this manifest covariate.
    #[arg(long)]
    pub covariate: Option<String>,
    /// Ground truth as `volume,motion_score` rows (default: manifest labels).
    #[arg(long, value_name = "CSV")]
    pub labels: Option<PathBuf>,
    /// Restrict to one split.
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long, default_value = "motion_score")]
    pub target: Target,
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AesArgs {
    #[arg(long, value_name = "PATH")]
    pub volume: PathBuf,
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Runtime => 1,
        ErrorKind::Usage => 2,
        ErrorKind::Domain => 3,
    }
}

/// Scans raw arguments for `--config PATH` / `--config=PATH`.
fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts config-file arguments right after the subcommand name so that
/// flags typed later take precedence.
fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let entries = parse_config(&text, &path)?;
    let root = Cli::command();
    let Some((pos, sub)) = args
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| root.find_subcommand(a).map(|s| (i, s.clone())))
    else {
        // let clap report the missing subcommand
        return Ok(args);
    };
    let extra = config_to_args(&entries, &root, &sub, &path)?;
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Runs the tool on `args` (program name first), writing results to `out`
/// and diagnostics to `err`. Returns the process exit code.
pub fn run(args: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(e.kind());
        }
    };
    let root = Cli::command();
    let matches = match root.clone().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return 2;
        }
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = root.find_subcommand(name).expect("parsed subcommand exists");
    let resolved = echo(name, sub_matches, sub);

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return 1;
        }
    };
    // results are buffered so the command can run inside the pool
    let (result, stdout, stderr) = pool.install(|| {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let r = commands::dispatch(&cli.command, &resolved, &mut o, &mut e);
        (r, o, e)
    });
    let _ = err.write_all(&stderr);
    let _ = out.write_all(&stdout);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(e.kind())
        }
    }
}
