use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "ace-sched", version, about = "Adaptive detector profiling, selection and simulation")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "ACE_SCHED_SEED", default_value_t = 0)]
    seed: u64,

    /// Directory for outputs given as relative paths, and for run manifests.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive a scaled, pruned family member from a base configuration.
    Synth(SynthArgs),
    /// Sweep a configuration grid with synthetic detectors and write a profile table.
    Profile(ProfileArgs),
    /// Replay telemetry through the selector and log its decisions.
    Select(SelectArgs),
    /// Run a closed-loop scenario with the adaptive controller or a fixed point.
    Simulate(SimulateArgs),
    /// Run the ROI tracker over one video.
    Track(TrackArgs),
    /// Score predictions against ground truth and events.
    Eval(EvalArgs),
    /// Turn decision or run logs into CSV for plotting.
    PlotData(PlotArgs),
}

#[derive(Debug, Args, serde::Serialize)]
struct SynthArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    cmax: Option<u32>,
    /// Comma-separated pyramid levels to keep, e.g. P3,P4.
    #[arg(long, default_value = "P3,P4,P5")]
    heads: String,
    #[arg(long)]
    simplify_attention: bool,
    #[arg(long, default_value_t = 8)]
    granularity: u32,
    #[arg(long)]
    out: PathBuf,
    /// Print a layer/channel/parameter summary as JSON.
    #[arg(long)]
    report: bool,
}

#[derive(Debug, Args, serde::Serialize)]
struct ProfileArgs {
    /// `default`, or a JSON file with `resolutions` and `strides`.
    #[arg(long, default_value = "default")]
    grid: String,
    /// Oracle calibration: JSON array of detector tiers.
    #[arg(long)]
    oracle: PathBuf,
    /// Timeline JSON file or a directory of them. Synthetic scripts are
    /// generated when omitted.
    #[arg(long)]
    videos: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    resolutions: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    strides: Option<Vec<u32>>,
    /// Power CSV to replay instead of the oracle's own energy figures.
    #[arg(long)]
    power: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    idle_w: f64,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, default_value_t = 2)]
    scripts: usize,
    #[arg(long, default_value_t = 3000)]
    script_frames: usize,
    #[arg(long, default_value_t = 0.03)]
    duty: f64,
    #[arg(long, default_value = "ace_profiles.json")]
    out: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
struct SelectArgs {
    #[arg(long)]
    profiles: PathBuf,
    /// Telemetry CSV, or `live` to read CSV rows from standard input.
    #[arg(long)]
    telemetry: String,
    #[arg(long, default_value_t = 0.0)]
    amin: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 50.0)]
    battery_wh: f64,
    #[arg(long, default_value_t = 1.0)]
    soc: f64,
    #[arg(long, default_value_t = 3600.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    bg_w: f64,
    /// Explicit per-frame energy budget; replaces the battery model.
    #[arg(long, conflicts_with_all = ["battery_wh", "soc", "horizon", "bg_w"])]
    ebud_mj: Option<f64>,
    #[arg(long, default_value_t = 5)]
    topk: usize,
    #[arg(long, default_value_t = 85.0)]
    t_cap: f64,
    #[arg(long, default_value_t = 90.0)]
    util_thresh: f64,
    #[arg(long, default_value = "decisions.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    Adaptive,
    Fixed,
    Compare,
}

#[derive(Debug, Args, serde::Serialize)]
struct SimulateArgs {
    /// Bundled scenario name or a scenario JSON file.
    #[arg(long, default_value = "balanced")]
    scenario: String,
    #[arg(long)]
    oracle: PathBuf,
    /// Profile table; built from the oracle on a separate script when omitted.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Timeline JSON to run; a synthetic script is generated when omitted.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    frames: usize,
    #[arg(long, default_value_t = 0.03)]
    duty: f64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Compare)]
    policy: PolicyArg,
    /// Fixed operating point as model@resolution/stride; defaults to the most accurate profile.
    #[arg(long)]
    fixed: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    epoch_s: f64,
}

#[derive(Debug, Args, serde::Serialize)]
struct TrackArgs {
    /// Oracle calibration JSON (first tier is used) or a prediction JSON-lines replay file.
    #[arg(long)]
    detections: PathBuf,
    /// Timeline JSON for the video.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 1.8)]
    s: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 8)]
    tmiss: u32,
    #[arg(long, default_value_t = 640)]
    resolution: u32,
    #[arg(long, default_value = "track.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
struct EvalArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    #[arg(long, default_value_t = 0.6)]
    lambda: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum PlotKind {
    Pareto,
    Timeline,
}

#[derive(Debug, Args, serde::Serialize)]
struct PlotArgs {
    /// Decision log from `select` or run log from `simulate`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Marks an error as a usage problem (exit code 1) rather than a data problem.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Resolves a relative output path against the output directory.
pub fn resolve(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (name, flags) = match &cli.command {
        Command::Synth(a) => ("synth", serde_json::to_value(a)?),
        Command::Profile(a) => ("profile", serde_json::to_value(a)?),
        Command::Select(a) => ("select", serde_json::to_value(a)?),
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?),
        Command::Track(a) => ("track", serde_json::to_value(a)?),
        Command::Eval(a) => ("eval", serde_json::to_value(a)?),
        Command::PlotData(a) => ("plot-data", serde_json::to_value(a)?),
    };
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", cli.out_dir.display()))?;
    let mut ctx = Context {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        manifest: RunManifest::start(name, flags, cli.seed),
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &mut ctx)?,
        Command::Profile(a) => commands::profile(a, &mut ctx)?,
        Command::Select(a) => commands::select(a, &mut ctx)?,
        Command::Simulate(a) => commands::simulate(a, &mut ctx)?,
        Command::Track(a) => commands::track(a, &mut ctx)?,
        Command::Eval(a) => commands::eval(a, &mut ctx)?,
        Command::PlotData(a) => commands::plot_data(a, &mut ctx)?,
    }
    ctx.manifest.finish(&ctx.out_dir)?;
    Ok(())
}
