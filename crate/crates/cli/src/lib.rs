//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 for data errors (reported as JSON on stderr), 2 for usage
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stabilikit::eval::{Localization, SweepMetric};
use stabilikit::io::RunConfig;
use stabilikit::stability::Channels;
use stabilikit::synth::MotionProgram;
use stabilikit::Error;

mod commands;
mod inputs;

#[derive(Debug, Parser)]
#[command(name = "stabilikit", version, about = "CoM, CoP, BoS and stability metrics from pose and plantar pressure")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Run configuration (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the configuration and STABILIKIT_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic takes with known CoM, CoP and BoS.
    Synth(SynthArgs),
    /// Triangulate the 2D detections of takes into 3D joints.
    Triangulate(InputArgs),
    /// Train CoMNet, leave-one-subject-out unless --no-loso.
    TrainCom(TrainArgs),
    /// CoM error statistics per estimator.
    ComEval(ComEvalArgs),
    /// Per-frame CoMtoCoP / CoMtoBoS series for a channel combination.
    Stability(StabilityArgs),
    /// CoP error or BoS IoU across pressure thresholds.
    Sweep(SweepArgs),
    /// Correlation and MAE of every channel combination against ground truth.
    Study(StudyArgs),
    /// Zero-lag low-pass trend of the stability series.
    Trend(TrendArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Take manifests, or directories searched for `*.take.json`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub subjects: usize,
    /// Motion programs, one take each per subject.
    #[arg(long, value_delimiter = ',', default_value = "static,sway,weight-shift,single-support-lift,lunge")]
    pub programs: Vec<MotionProgram>,
    /// Seconds per take.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pixel_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub joint_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pressure_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub com_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub occlusion: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 3072)]
    pub width: usize,
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    /// Train one network on every take instead of one per held-out subject.
    #[arg(long)]
    pub no_loso: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ImageComSource {
    Provided,
    Dempster,
    Comnet,
}

#[derive(Debug, Args)]
pub struct ImageComArgs {
    /// Where the image-based CoM comes from.
    #[arg(long, value_enum, default_value = "provided")]
    pub image_com: ImageComSource,
    /// CoMNet model file, or a directory of per-subject `com_<subject>.stbk`.
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComEvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Pressure-localization-CoM sources, e.g. GT-IM-GT.
    #[arg(long)]
    pub channels: Option<Channels>,
    /// kPa
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub com: ImageComArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// cop-error or bos-iou
    #[arg(long, default_value = "cop-error")]
    pub metric: SweepMetric,
    /// gt, hp or op
    #[arg(long, default_value = "gt")]
    pub localization: Localization,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub com: ImageComArgs,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub channels: Option<Channels>,
    /// Hz
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[command(flatten)]
    pub com: ImageComArgs,
}

/// Configuration after file, environment and flags are applied, in that order.
fn resolve_config(g: &Global) -> Result<RunConfig, Error> {
    let cfg = match &g.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = cfg.with_env_overrides()?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match resolve_config(&cli.global).and_then(|cfg| commands::dispatch(&cli.command, cfg)) {
        Ok(()) => 0,
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            let _ = writeln!(std::io::stderr(), "{report}");
            1
        }
    }
}
