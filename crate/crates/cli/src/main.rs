//! `hvmine`: command-line stages for building tracking training data.
//!
//! Every stage reads and writes files, so each can be re-run on its own.
//! Exit status is 0 on success, 1 on usage errors and 2 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

#[derive(Debug, Parser)]
#[command(
    name = "hvmine",
    version,
    about = "Hallucinated-video and hard-example tracking data pipeline"
)]
pub struct Cli {
    /// Global seed; overrides seeds from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file. Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-video work (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Frame rate for inputs without an fps sidecar, or for generated scenes.
    #[arg(long, global = true)]
    pub fps: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotated images to hallucinated video clips.
    Hallucinate(HallucinateArgs),
    /// Detections (and optional motion predictions) to tracklets.
    Associate(AssociateArgs),
    /// Join broken tracklets into tracks and log every join.
    Rectify(RectifyArgs),
    /// Merge log to hard-example clips.
    Mine(MineArgs),
    /// Clip pools to training batch manifests.
    Sample(SampleArgs),
    /// Score tracking results against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene with fragmented tracks.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    In,
    Out,
}

#[derive(Debug, Args)]
pub struct HallucinateArgs {
    /// JSON list of {"image": path, "boxes": [[x, y, w, h], ...], "id": optional}.
    /// Image paths are relative to the manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output root; one directory per image.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Use this final window scale instead of sampling one per image.
    #[arg(long)]
    pub final_scale: Option<f64>,
    /// Fix the zoom direction instead of sampling it.
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Rendered frame size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size)]
    pub output_size: Option<(u32, u32)>,
    #[arg(long)]
    pub max_pan: Option<f64>,
    /// Skip photometric effects.
    #[arg(long)]
    pub no_effects: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Identity,
    ConstantVelocity,
}

#[derive(Debug, Args)]
pub struct AssociateArgs {
    /// Detection file; repeat for several videos.
    #[arg(long, required = true)]
    pub detections: Vec<PathBuf>,
    /// Recorded per-track predictions (`frame,id,x,y,w,h,visibility`),
    /// paired with `--detections` by position. Replaces the built-in predictor.
    #[arg(long)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "identity")]
    pub predictor: PredictorArg,
    /// Tracklet file, paired with `--detections` by position.
    #[arg(long, required = true)]
    pub out: Vec<PathBuf>,
    /// Number of frames in each video; defaults to the detection sidecar.
    #[arg(long)]
    pub frame_count: Option<u32>,
    #[arg(long)]
    pub vis_keep: Option<f64>,
    #[arg(long)]
    pub match_iou: Option<f64>,
    #[arg(long)]
    pub spawn_conf: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    /// Tracklet file; repeat for several videos.
    #[arg(long, required = true)]
    pub tracklets: Vec<PathBuf>,
    /// Track file, paired with `--tracklets` by position.
    #[arg(long, required = true)]
    pub out: Vec<PathBuf>,
    /// Merge log path, paired by position (default: `<out>.log.json`).
    #[arg(long)]
    pub log: Vec<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub clip_padding: Option<f64>,
    #[arg(long)]
    pub min_score: Option<f64>,
    /// Leave joined gaps empty instead of interpolating.
    #[arg(long)]
    pub no_interpolate: bool,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub frame_count: Option<u32>,
    #[arg(long)]
    pub video: Option<String>,
    #[arg(long)]
    pub clip_padding: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Hallucinated video directory, or a root holding several.
    #[arg(long)]
    pub hv: Vec<PathBuf>,
    /// Rectified track file of a real video.
    #[arg(long)]
    pub rv: Vec<PathBuf>,
    /// Hard-clip JSON from `mine`.
    #[arg(long)]
    pub hard: Vec<PathBuf>,
    /// Output manifest, one JSON record per training pair.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub balancing_ratio: Option<f64>,
    /// Fraction of real-video draws from hard clips, or `none` for
    /// unbiased draws.
    #[arg(long, value_parser = parse_rate)]
    pub hard_rate: Option<HardRate>,
    #[arg(long)]
    pub max_delta: Option<u32>,
    /// Length of easy clips cut from unmined stretches.
    #[arg(long, default_value_t = 16)]
    pub easy_clip_len: u32,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth track file; repeat for several sequences.
    #[arg(long, required = true)]
    pub gt: Vec<PathBuf>,
    /// Result track file, paired with `--gt` by position.
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long, default_value_t = hvmine::metrics::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionArg {
    Linear,
    Sinusoidal,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long)]
    pub frames: Option<u32>,
    #[arg(long, value_enum)]
    pub motion: Option<MotionArg>,
    #[arg(long)]
    pub gaps_per_track: Option<usize>,
    #[arg(long)]
    pub min_gap: Option<u32>,
    #[arg(long)]
    pub max_gap: Option<u32>,
    /// Confidence written on detections.
    #[arg(long, default_value_t = 1.0)]
    pub confidence: f64,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

/// `None` disables biased sampling of hard clips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardRate(pub Option<f64>);

fn parse_rate(s: &str) -> Result<HardRate, String> {
    if s.eq_ignore_ascii_case("none") || s.eq_ignore_ascii_case("n/a") {
        return Ok(HardRate(None));
    }
    let r: f64 = s
        .parse()
        .map_err(|_| format!("expected a number or `none`, got {s:?}"))?;
    if !(0.0..=1.0).contains(&r) {
        return Err(format!("rate must be in [0, 1], got {r}"));
    }
    Ok(HardRate(Some(r)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
