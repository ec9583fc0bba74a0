use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context as _, Result};
use log::{info, warn};
use serde_json::Value;

use ace_sched::ace_profiler::{ConfigPoint, GridSpec, PowerSource, ProfileConfig};
use ace_sched::config_synth::{emit_config, graph_report, parse_config, parse_heads, synthesize_family, FamilySpec};
use ace_sched::detector::{Detector, FrameView, ReplayDetector};
use ace_sched::io;
use ace_sched::roi_tracker::{RoiTracker, TrackerParams};
use ace_sched::runtime_selector::{Constraints, Controller, PressureCaps, SelectorConfig, TelemetryFeed};
use ace_sched::sim_harness::{
    best_accuracy_point, generate_timeline, load_family, profile_family, run_closed_loop, write_summary_csv, ClosedLoopConfig,
    DeviceModel, Policy, RunLog, ScenarioConfig, ScriptParams, SyntheticDetector, TierCalibration,
};
use ace_sched::temporal_metrics::{evaluate, EvalParams, GestureTimeline};

use crate::{resolve, usage, Context, EvalArgs, PlotArgs, PlotKind, PolicyArg, ProfileArgs, SelectArgs, SimulateArgs, SynthArgs, TrackArgs};

/// Offset applied to the run seed for the script used to build a profile
/// table on the fly, so profiling and evaluation never share a script.
const PROFILE_SEED_SALT: u64 = 0x5eed_0f_ace;
// enough gesture episodes that event F1 in the table is not dominated by noise
const PROFILE_SCRIPTS: u64 = 4;
const PROFILE_SCRIPT_FRAMES: usize = 15_000;

fn read_text(ctx: &mut Context, path: &Path) -> Result<String> {
    ctx.manifest.input(path);
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(ctx: &mut Context, path: &Path) -> Result<(PathBuf, BufWriter<File>)> {
    let path = resolve(&ctx.out_dir, path);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    ctx.manifest.output(&path);
    Ok((path, BufWriter::new(file)))
}

fn load_timeline(ctx: &mut Context, path: &Path) -> Result<GestureTimeline> {
    let text = read_text(ctx, path)?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a timeline document", path.display()))
}

fn load_tiers(ctx: &mut Context, path: &Path) -> Result<Vec<TierCalibration>> {
    let text = read_text(ctx, path)?;
    let tiers = load_family(&text).with_context(|| format!("invalid oracle calibration {}", path.display()))?;
    if tiers.is_empty() {
        return Err(anyhow!("oracle calibration {} lists no tiers", path.display()));
    }
    Ok(tiers)
}

pub fn synth(a: &SynthArgs, ctx: &mut Context) -> Result<()> {
    let heads = parse_heads(&a.heads).map_err(|e| usage(e.to_string()))?;
    let spec = FamilySpec {
        alpha: a.alpha,
        beta: a.beta,
        c_max: a.cmax,
        heads,
        simplify_attention: a.simplify_attention,
        granularity: a.granularity,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let text = read_text(ctx, &a.base)?;
    let base = parse_config(&text).with_context(|| format!("invalid configuration {}", a.base.display()))?;
    let graph = synthesize_family(&base, &spec)?;
    let (path, mut out) = create(ctx, &a.out)?;
    out.write_all(emit_config(&graph).as_bytes())?;
    out.flush()?;
    info!("wrote {} layers to {}", graph.len(), path.display());
    if a.report {
        println!("{}", serde_json::to_string_pretty(&graph_report(&graph))?);
    }
    Ok(())
}

fn load_videos(ctx: &mut Context, a: &ProfileArgs) -> Result<Vec<GestureTimeline>> {
    let Some(path) = &a.videos else {
        let params = ScriptParams {
            total_frames: a.script_frames,
            duty_cycle: a.duty,
            ..Default::default()
        };
        return (0..a.scripts.max(1))
            .map(|i| generate_timeline(ctx.seed.wrapping_add(i as u64), &params).map_err(|e| usage(e.to_string())))
            .collect();
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(anyhow!("no timeline files in {}", path.display()));
        }
        files.iter().map(|f| load_timeline(ctx, f)).collect()
    } else {
        Ok(vec![load_timeline(ctx, path)?])
    }
}

pub fn profile(a: &ProfileArgs, ctx: &mut Context) -> Result<()> {
    let mut grid = if a.grid == "default" {
        GridSpec::default()
    } else {
        let text = read_text(ctx, Path::new(&a.grid))?;
        serde_json::from_str(&text).with_context(|| format!("invalid grid file {}", a.grid))?
    };
    if let Some(r) = &a.resolutions {
        grid.resolutions = r.clone();
    }
    if let Some(s) = &a.strides {
        grid.strides = s.clone();
    }
    if grid.resolutions.contains(&0) || grid.strides.contains(&0) {
        return Err(usage("resolutions and strides must be positive"));
    }
    let family = load_tiers(ctx, &a.oracle)?;
    let videos = load_videos(ctx, a)?;
    let mut power = match &a.power {
        Some(p) => {
            ctx.manifest.input(p);
            let f = File::open(p).with_context(|| format!("cannot read {}", p.display()))?;
            PowerSource::replay(io::read_power_trace(f, a.idle_w)?)
        }
        None => PowerSource::synthetic(a.idle_w),
    };
    let cfg = ProfileConfig {
        warmup_calls: a.warmup,
        ..Default::default()
    };
    let table = profile_family(&family, &grid, &videos, ctx.seed, &mut power, &cfg)?;
    let (path, out) = create(ctx, &a.out)?;
    io::write_profiles(&table, out)?;
    info!("wrote {} profiles to {}", table.len(), path.display());
    Ok(())
}

pub fn select(a: &SelectArgs, ctx: &mut Context) -> Result<()> {
    let text = read_text(ctx, &a.profiles)?;
    let profiles = io::read_profiles(&text).with_context(|| format!("invalid profile table {}", a.profiles.display()))?;
    let constraints = Constraints {
        a_min: a.amin,
        fps_target: a.fps,
        battery_capacity_wh: a.battery_wh,
        state_of_charge: a.soc,
        horizon_s: a.horizon,
        background_power_w: a.bg_w,
        e_bud_override_j: a.ebud_mj.map(|mj| mj * 1e-3),
    };
    constraints.validate().map_err(|e| usage(e.to_string()))?;
    let cfg = SelectorConfig {
        caps: PressureCaps {
            t_cap: a.t_cap,
            util_thresh: a.util_thresh,
        },
        top_k: a.topk.max(1),
        ..Default::default()
    };
    let mut controller = Controller::new(profiles, constraints, cfg)?;
    let (path, mut out) = create(ctx, &a.out)?;
    let mut count = 0usize;

    if a.telemetry == "live" {
        let (tx, mut feed) = TelemetryFeed::channel();
        let done = Arc::new(AtomicBool::new(false));
        let reader_done = Arc::clone(&done);
        let reader = std::thread::spawn(move || -> ace_sched::Result<()> {
            let result = io::read_telemetry(std::io::stdin().lock()).map(|samples| {
                for s in samples {
                    if tx.send(s).is_err() {
                        break;
                    }
                }
            });
            reader_done.store(true, Ordering::SeqCst);
            result
        });
        let mut last_t = f64::NEG_INFINITY;
        loop {
            let finished = done.load(Ordering::SeqCst);
            match feed.latest() {
                Some(s) if s.timestamp > last_t => {
                    last_t = s.timestamp;
                    let d = controller.step(s.timestamp, Some(&s), false)?;
                    serde_json::to_writer(&mut out, &d)?;
                    out.write_all(b"\n")?;
                    count += 1;
                }
                _ if finished => break,
                _ => std::thread::sleep(Duration::from_millis(20)),
            }
        }
        reader
            .join()
            .map_err(|_| anyhow!("telemetry reader panicked"))?
            .context("invalid telemetry on standard input")?;
    } else {
        let path = PathBuf::from(&a.telemetry);
        ctx.manifest.input(&path);
        let f = File::open(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let samples = io::read_telemetry(BufReader::new(f)).with_context(|| format!("invalid telemetry {}", path.display()))?;
        if samples.is_empty() {
            return Err(anyhow!("telemetry file {} has no samples", path.display()));
        }
        for s in &samples {
            let d = controller.step(s.timestamp, Some(s), false)?;
            serde_json::to_writer(&mut out, &d)?;
            out.write_all(b"\n")?;
            count += 1;
        }
    }
    out.flush()?;
    info!("wrote {count} decisions to {}", path.display());
    Ok(())
}

fn parse_point(s: &str) -> Result<ConfigPoint> {
    let bad = || usage(format!("fixed point '{s}' is not model@resolution/kstride"));
    let (model, rest) = s.rsplit_once('@').ok_or_else(bad)?;
    let (res, stride) = rest.split_once('/').ok_or_else(bad)?;
    let stride = stride.strip_prefix('k').unwrap_or(stride);
    Ok(ConfigPoint::new(model, res.parse().map_err(|_| bad())?, stride.parse().map_err(|_| bad())?))
}

fn write_run(ctx: &mut Context, name: &str, log: &RunLog) -> Result<()> {
    let (_, out) = create(ctx, Path::new(&format!("{name}.jsonl")))?;
    log.write_jsonl(out)?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs, ctx: &mut Context) -> Result<()> {
    let scenario = if Path::new(&a.scenario).is_file() {
        let text = read_text(ctx, Path::new(&a.scenario))?;
        ScenarioConfig::from_json(&text).with_context(|| format!("invalid scenario {}", a.scenario))?
    } else {
        ScenarioConfig::preset(&a.scenario).map_err(|e| usage(e.to_string()))?
    };
    let family = load_tiers(ctx, &a.oracle)?;
    let script_params = ScriptParams {
        total_frames: a.frames,
        duty_cycle: a.duty,
        ..Default::default()
    };
    script_params.validate().map_err(|e| usage(e.to_string()))?;

    let profiles = match &a.profiles {
        Some(p) => {
            let text = read_text(ctx, p)?;
            io::read_profiles(&text).with_context(|| format!("invalid profile table {}", p.display()))?
        }
        None => {
            let profiling = ScriptParams {
                total_frames: PROFILE_SCRIPT_FRAMES,
                ..script_params.clone()
            };
            let videos = (0..PROFILE_SCRIPTS)
                .map(|i| generate_timeline((ctx.seed ^ PROFILE_SEED_SALT).wrapping_add(i), &profiling))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let device = DeviceModel::default();
            profile_family(
                &family,
                &GridSpec::default(),
                &videos,
                ctx.seed,
                &mut PowerSource::synthetic(device.idle_power_w),
                &ProfileConfig::default(),
            )?
        }
    };
    let script = match &a.script {
        Some(p) => load_timeline(ctx, p)?,
        None => generate_timeline(ctx.seed, &script_params)?,
    };
    let cfg = ClosedLoopConfig {
        seed: ctx.seed,
        epoch_s: a.epoch_s,
        ..Default::default()
    };
    if !(cfg.epoch_s > 0.0) {
        return Err(usage("epoch length must be positive"));
    }
    let fixed_point = match &a.fixed {
        Some(s) => parse_point(s)?,
        None => best_accuracy_point(&profiles)?,
    };

    let mut summaries = Vec::new();
    if matches!(a.policy, PolicyArg::Fixed | PolicyArg::Compare) {
        let log = run_closed_loop(&profiles, &family, &scenario, &script, &Policy::Fixed(fixed_point.clone()), &cfg)?;
        write_run(ctx, &format!("{}-fixed", scenario.name), &log)?;
        summaries.push(log.summary);
    }
    if matches!(a.policy, PolicyArg::Adaptive | PolicyArg::Compare) {
        let log = run_closed_loop(&profiles, &family, &scenario, &script, &Policy::Adaptive, &cfg)?;
        write_run(ctx, &format!("{}-adaptive", scenario.name), &log)?;
        summaries.push(log.summary);
    }
    let (_, out) = create(ctx, Path::new(&format!("{}-summary.csv", scenario.name)))?;
    write_summary_csv(&summaries, out)?;

    let report = match summaries.as_slice() {
        [fixed, adaptive] => serde_json::json!({
            "fixed_point": fixed_point,
            "fixed": fixed,
            "adaptive": adaptive,
            "energy_ratio": adaptive.energy_per_frame_j / fixed.energy_per_frame_j,
            "event_f1_delta": adaptive.event_f1 - fixed.event_f1,
        }),
        [one] => serde_json::to_value(one)?,
        _ => Value::Null,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn track(a: &TrackArgs, ctx: &mut Context) -> Result<()> {
    let params = TrackerParams {
        roi_scale: a.s,
        iou_gate: a.tau,
        miss_budget: a.tmiss,
        ..Default::default()
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    if a.resolution == 0 {
        return Err(usage("resolution must be positive"));
    }
    let timeline = load_timeline(ctx, &a.frames)?;
    let mut detector: Box<dyn Detector> = if a.detections.extension().is_some_and(|x| x == "jsonl") {
        ctx.manifest.input(&a.detections);
        let f = File::open(&a.detections).with_context(|| format!("cannot read {}", a.detections.display()))?;
        Box::new(ReplayDetector::new(io::read_predictions(BufReader::new(f))?))
    } else {
        let tiers = load_tiers(ctx, &a.detections)?;
        Box::new(SyntheticDetector::new(tiers[0].clone(), ctx.seed)?)
    };

    let mut tracker = RoiTracker::new(params)?;
    let (path, mut out) = create(ctx, &a.out)?;
    let full = f64::from(a.resolution).powi(2);
    let (mut active, mut pixels, mut energy) = (0usize, 0.0, 0.0);
    for index in 0..timeline.total_frames() {
        let log = tracker.step(&FrameView { timeline: &timeline, index }, &mut detector, a.resolution)?;
        active += usize::from(log.track_active);
        pixels += log.processed_pixels;
        energy += log.energy_j;
        serde_json::to_writer(&mut out, &log)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let frames = timeline.total_frames();
    info!("wrote {frames} frame records to {}", path.display());
    let summary = serde_json::json!({
        "frames": frames,
        "track_active_frames": active,
        "pixel_fraction": if frames > 0 { pixels / (full * frames as f64) } else { 0.0 },
        "energy_j": energy,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn eval(a: &EvalArgs, ctx: &mut Context) -> Result<()> {
    let params = EvalParams {
        iou_thresh: a.iou,
        conf_thresh: a.conf,
        lambda: a.lambda,
    };
    if !(0.0..=1.0).contains(&a.lambda) || !(0.0..=1.0).contains(&a.iou) {
        return Err(usage("--iou and --lambda must lie in [0, 1]"));
    }
    ctx.manifest.input(&a.preds);
    let preds = io::read_predictions(BufReader::new(
        File::open(&a.preds).with_context(|| format!("cannot read {}", a.preds.display()))?,
    ))
    .with_context(|| format!("invalid predictions {}", a.preds.display()))?;
    ctx.manifest.input(&a.gt);
    let gt = io::read_ground_truth(BufReader::new(
        File::open(&a.gt).with_context(|| format!("cannot read {}", a.gt.display()))?,
    ))
    .with_context(|| format!("invalid ground truth {}", a.gt.display()))?;
    let events_text = read_text(ctx, &a.events)?;
    let events = io::read_events(&events_text).with_context(|| format!("invalid events {}", a.events.display()))?;
    let report = evaluate(&preds, &gt, &events, &params)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn num(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn plot_data(a: &PlotArgs, ctx: &mut Context) -> Result<()> {
    let text = read_text(ctx, &a.log)?;
    let mut rows: Vec<Value> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).with_context(|| format!("{} line {}", a.log.display(), n + 1))?;
        rows.push(v);
    }

    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(ctx, p)?.1),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    match a.kind {
        PlotKind::Pareto => {
            w.write_record(["t", "model", "resolution", "stride", "a_norm", "c_norm", "e_norm", "score", "chosen"])?;
            for row in &rows {
                let decision = row.get("decision").filter(|d| d.is_object()).unwrap_or(row);
                let Some(top) = decision.get("top_k").and_then(Value::as_array) else {
                    continue;
                };
                let chosen = &decision["chosen"];
                for entry in top {
                    let is_chosen = entry["model"] == chosen["model"]
                        && entry["resolution"] == chosen["resolution"]
                        && entry["stride"] == chosen["stride"];
                    w.write_record([
                        num(&decision["t"]),
                        num(&entry["model"]),
                        num(&entry["resolution"]),
                        num(&entry["stride"]),
                        num(&entry["a_norm"]),
                        num(&entry["c_norm"]),
                        num(&entry["e_norm"]),
                        num(&entry["score"]),
                        is_chosen.to_string(),
                    ])?;
                }
            }
        }
        PlotKind::Timeline => {
            w.write_record([
                "t", "model", "resolution", "stride", "score", "dA", "gC", "eE", "s_lat", "s_energy", "s_acc", "thermal",
                "util", "battery", "fallback", "energy_j", "frames",
            ])?;
            for row in &rows {
                let d = row.get("decision").filter(|d| d.is_object()).unwrap_or(row);
                let chosen = row.get("chosen").unwrap_or(&d["chosen"]);
                w.write_record([
                    num(&row["t"]),
                    num(&chosen["model"]),
                    num(&chosen["resolution"]),
                    num(&chosen["stride"]),
                    num(&d["score"]),
                    num(&d["weights"]["dA"]),
                    num(&d["weights"]["gC"]),
                    num(&d["weights"]["eE"]),
                    num(&d["slacks"]["s_lat"]),
                    num(&d["slacks"]["s_energy"]),
                    num(&d["slacks"]["s_acc"]),
                    num(&d["pressures"]["thermal"]),
                    num(&d["pressures"]["util"]),
                    num(&d["pressures"]["battery"]),
                    num(&d["fallback"]),
                    num(&row["energy_j"]),
                    num(&row["frames"]),
                ])?;
            }
        }
    }
    w.flush()?;
    if rows.is_empty() {
        warn!("{} holds no records", a.log.display());
    }
    Ok(())
}
