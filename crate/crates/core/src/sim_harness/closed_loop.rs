use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{step_device, DeviceModel, ScenarioConfig, SyntheticDetector, TierCalibration};
use crate::ace_profiler::{AceProfile, ConfigPoint, RunnerConfig, StreamRunner};
use crate::detector::FrameView;
use crate::error::{invalid, Error, Result};
use crate::runtime_selector::{Controller, Decision, SelectorConfig, TelemetrySample};
use crate::temporal_metrics::{evaluate, Detection, EvalParams, GestureTimeline, MetricsReport, DEFAULT_DECAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopConfig {
    pub seed: u64,
    /// Seconds between controller decisions.
    pub epoch_s: f64,
    pub selector: SelectorConfig,
    pub device: DeviceModel,
    pub decay: f64,
    pub eval: EvalParams,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epoch_s: 5.0,
            selector: SelectorConfig::default(),
            device: DeviceModel::default(),
            decay: DEFAULT_DECAY,
            eval: EvalParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "point")]
pub enum Policy {
    Adaptive,
    Fixed(ConfigPoint),
}

/// One decision epoch of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub t: f64,
    pub start_frame: usize,
    pub frames: usize,
    pub chosen: ConfigPoint,
    pub telemetry: TelemetrySample,
    pub decision: Option<Decision>,
    pub calls: usize,
    pub energy_j: f64,
    pub busy_s: f64,
    pub processed_pixels: f64,
    pub active_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub policy: Policy,
    pub frames: usize,
    pub calls: usize,
    pub energy_per_frame_j: f64,
    pub mean_call_latency_s: f64,
    pub latency_per_frame_s: f64,
    pub frame_f1: f64,
    pub event_f1: f64,
    pub blended: f64,
    pub switches: usize,
    pub processed_pixels: f64,
    pub device_energy_j: f64,
    pub final_soc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub epochs: Vec<EpochRecord>,
    pub predictions: Vec<Detection>,
    pub metrics: MetricsReport,
    pub summary: RunSummary,
}

impl RunLog {
    /// Writes one JSON object per epoch.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Chosen point and energy per epoch as CSV.
    pub fn write_epoch_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "model", "resolution", "stride", "dA", "gC", "eE", "battery_pct", "cpu_temp", "gpu_util", "energy_j",
            "energy_per_frame_j", "calls",
        ])?;
        for e in &self.epochs {
            let (da, gc, ee) = e
                .decision
                .as_ref()
                .map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.weights.delta_a, d.weights.gamma_c, d.weights.eta_e));
            w.write_record([
                e.t.to_string(),
                e.chosen.model.clone(),
                e.chosen.resolution.to_string(),
                e.chosen.stride.to_string(),
                da.to_string(),
                gc.to_string(),
                ee.to_string(),
                e.telemetry.battery_pct.to_string(),
                e.telemetry.cpu_temp_c.to_string(),
                e.telemetry.gpu_util_pct.to_string(),
                e.energy_j.to_string(),
                (e.energy_j / e.frames.max(1) as f64).to_string(),
                e.calls.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a script through the detector family under `policy`, one controller
/// decision per epoch.
///
/// Each epoch samples device telemetry (with the scenario's overrides),
/// picks an operating point, runs the matching oracle over the epoch's
/// frames and advances the device model by the energy drawn.
pub fn run_closed_loop(
    profiles: &[AceProfile],
    family: &[TierCalibration],
    scenario: &ScenarioConfig,
    script: &GestureTimeline,
    policy: &Policy,
    cfg: &ClosedLoopConfig,
) -> Result<RunLog> {
    scenario.validate()?;
    cfg.device.validate()?;
    if !(cfg.epoch_s > 0.0) {
        return Err(invalid(format!("epoch length {} must be positive", cfg.epoch_s)));
    }
    let mut detectors: BTreeMap<String, SyntheticDetector> = BTreeMap::new();
    for tier in family {
        if detectors
            .insert(tier.model.clone(), SyntheticDetector::new(tier.clone(), cfg.seed)?)
            .is_some()
        {
            return Err(invalid(format!("duplicate oracle tier '{}'", tier.model)));
        }
    }
    let tracker_of = |model: &str| family.iter().find(|t| t.model == model).and_then(|t| t.tracker);

    let mut controller = match policy {
        Policy::Adaptive => {
            for p in profiles {
                if !detectors.contains_key(&p.point.model) {
                    return Err(invalid(format!("no oracle for profiled model '{}'", p.point.model)));
                }
            }
            Some(Controller::new(profiles.to_vec(), scenario.constraints.clone(), cfg.selector.clone())?)
        }
        Policy::Fixed(point) => {
            point.validate()?;
            if !detectors.contains_key(&point.model) {
                return Err(invalid(format!("no oracle for model '{}'", point.model)));
            }
            None
        }
    };

    let fps = script.fps;
    let mut total = script.total_frames();
    if let Some(d) = scenario.duration_s {
        total = total.min((d * fps).round() as usize);
    }
    if total == 0 {
        return Err(Error::Empty("script"));
    }
    let frames_per_epoch = ((cfg.epoch_s * fps).round() as usize).max(1);
    let run_s = total as f64 / fps;

    let mut device = cfg.device.clone();
    let mut runner = StreamRunner::new(&RunnerConfig {
        decay: cfg.decay,
        tracker: None,
        eval: cfg.eval,
    })?;
    let mut predictions = Vec::new();
    let mut epochs = Vec::new();
    let mut last_telemetry = device.sample(0.0, device.idle_power_w);
    let mut gesture_active = false;
    let mut previous: Option<ConfigPoint> = None;
    let mut switches = 0usize;

    let mut start = 0usize;
    let mut epoch = 0usize;
    while start < total {
        let end = (start + frames_per_epoch).min(total);
        let t = start as f64 / fps;
        let mut telemetry = last_telemetry;
        telemetry.timestamp = t;
        scenario.overrides.apply(&mut telemetry, t / run_s);

        let (point, decision) = match (&mut controller, policy) {
            (Some(c), _) => {
                let d = c.step(t, Some(&telemetry), gesture_active)?;
                (d.chosen.clone(), Some(d))
            }
            (None, Policy::Fixed(p)) => (p.clone(), None),
            (None, Policy::Adaptive) => unreachable!("adaptive runs always build a controller"),
        };
        if previous.as_ref().is_some_and(|p| *p != point) {
            switches += 1;
        }
        previous = Some(point.clone());

        runner.set_tracker(tracker_of(&point.model))?;
        let detector = detectors
            .get_mut(&point.model)
            .ok_or_else(|| invalid(format!("no oracle for model '{}'", point.model)))?;
        detector.set_latency_factor(scenario.latency_factor_at(t));

        let mut calls = 0usize;
        let mut energy = 0.0;
        let mut busy = 0.0;
        let mut pixels = 0.0;
        let mut active = 0usize;
        for index in start..end {
            let view = FrameView { timeline: script, index };
            let r = runner.process_frame(&view, detector, &point)?;
            if let Some(call) = &r.call {
                calls += 1;
                energy += call.energy_j;
                busy += call.latency_s;
                pixels += call.processed_pixels;
                gesture_active = r.detections.iter().any(|d| d.confidence >= cfg.eval.conf_thresh);
            }
            if !script.gt_at(index).is_empty() {
                active += 1;
            }
            predictions.extend(r.detections);
        }
        if let (Some(c), true) = (&mut controller, calls > 0) {
            c.observe_latency(&point, busy / calls as f64);
        }
        let dt = (end - start) as f64 / fps;
        last_telemetry = step_device(&mut device, energy, busy, dt)?;

        epochs.push(EpochRecord {
            epoch,
            t,
            start_frame: start,
            frames: end - start,
            chosen: point,
            telemetry,
            decision,
            calls,
            energy_j: energy,
            busy_s: busy,
            processed_pixels: pixels,
            active_frames: active,
        });
        start = end;
        epoch += 1;
    }

    let gt: Vec<_> = script.ground_truth().into_iter().filter(|g| g.frame < total).collect();
    let events: Vec<_> = script.events.iter().copied().filter(|e| e.end < total).collect();
    let metrics = evaluate(&predictions, &gt, &events, &cfg.eval)?;

    let calls: usize = epochs.iter().map(|e| e.calls).sum();
    let energy: f64 = epochs.iter().map(|e| e.energy_j).sum();
    let busy: f64 = epochs.iter().map(|e| e.busy_s).sum();
    let summary = RunSummary {
        scenario: scenario.name.clone(),
        policy: policy.clone(),
        frames: total,
        calls,
        energy_per_frame_j: energy / total as f64,
        mean_call_latency_s: if calls > 0 { busy / calls as f64 } else { 0.0 },
        latency_per_frame_s: busy / total as f64,
        frame_f1: metrics.frame_f1,
        event_f1: metrics.event_f1,
        blended: metrics.blended,
        switches,
        processed_pixels: epochs.iter().map(|e| e.processed_pixels).sum(),
        device_energy_j: device.energy_drawn_j,
        final_soc: device.state_of_charge,
    };
    Ok(RunLog {
        epochs,
        predictions,
        metrics,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub fixed_point: ConfigPoint,
    pub fixed: RunSummary,
    pub adaptive: RunSummary,
    /// Adaptive energy per frame over fixed energy per frame.
    pub energy_ratio: f64,
    /// Adaptive event F1 minus fixed event F1.
    pub event_f1_delta: f64,
}

/// Highest blended accuracy in the table, ties to lower energy.
pub fn best_accuracy_point(profiles: &[AceProfile]) -> Result<ConfigPoint> {
    profiles
        .iter()
        .max_by(|a, b| {
            a.raw
                .a_blend
                .total_cmp(&b.raw.a_blend)
                .then(b.raw.e_per_frame.total_cmp(&a.raw.e_per_frame))
                .then_with(|| b.point.cmp(&a.point))
        })
        .map(|p| p.point.clone())
        .ok_or(Error::Empty("profile table"))
}

/// Runs the best-accuracy fixed point and the adaptive controller on the
/// same script and seed.
pub fn compare_fixed_vs_adaptive(
    profiles: &[AceProfile],
    family: &[TierCalibration],
    scenario: &ScenarioConfig,
    script: &GestureTimeline,
    cfg: &ClosedLoopConfig,
) -> Result<ComparisonReport> {
    let fixed_point = best_accuracy_point(profiles)?;
    let fixed = run_closed_loop(profiles, family, scenario, script, &Policy::Fixed(fixed_point.clone()), cfg)?;
    let adaptive = run_closed_loop(profiles, family, scenario, script, &Policy::Adaptive, cfg)?;
    let energy_ratio = if fixed.summary.energy_per_frame_j > 0.0 {
        adaptive.summary.energy_per_frame_j / fixed.summary.energy_per_frame_j
    } else {
        f64::NAN
    };
    Ok(ComparisonReport {
        fixed_point,
        event_f1_delta: adaptive.summary.event_f1 - fixed.summary.event_f1,
        energy_ratio,
        fixed: fixed.summary,
        adaptive: adaptive.summary,
    })
}

/// One CSV row per run summary.
pub fn write_summary_csv<W: Write>(rows: &[RunSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "policy",
        "frames",
        "calls",
        "energy_per_frame_mj",
        "mean_call_latency_ms",
        "frame_f1",
        "event_f1",
        "blended",
        "switches",
        "final_soc",
    ])?;
    for r in rows {
        let policy = match &r.policy {
            Policy::Adaptive => "adaptive".to_string(),
            Policy::Fixed(p) => format!("fixed:{p}"),
        };
        w.write_record([
            r.scenario.clone(),
            policy,
            r.frames.to_string(),
            r.calls.to_string(),
            (r.energy_per_frame_j * 1e3).to_string(),
            (r.mean_call_latency_s * 1e3).to_string(),
            r.frame_f1.to_string(),
            r.event_f1.to_string(),
            r.blended.to_string(),
            r.switches.to_string(),
            r.final_soc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
