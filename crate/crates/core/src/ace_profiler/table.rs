use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    effective_flops, effective_latency, nearest_rank, normalize_table, run_one_video, AceProfile, ConfigPoint,
    PowerSource, RawProfile, RunnerConfig, DEFAULT_RESOLUTIONS, DEFAULT_STRIDES,
};
use crate::detector::Detector;
use crate::error::{invalid, Error, Result};
use crate::roi_tracker::TrackerParams;
use crate::runtime_selector::AceWeights;
use crate::temporal_metrics::{EvalParams, GestureTimeline, DEFAULT_DECAY};

/// A model to sweep, optionally run behind the ROI tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default)]
    pub g640: Option<f64>,
    #[serde(default)]
    pub tracker: Option<TrackerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolutions: Vec<u32>,
    pub strides: Vec<u32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolutions: DEFAULT_RESOLUTIONS.to_vec(),
            strides: DEFAULT_STRIDES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Leading calls per grid point left out of latency statistics.
    pub warmup_calls: usize,
    pub decay: f64,
    pub eval: EvalParams,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            warmup_calls: 5,
            decay: DEFAULT_DECAY,
            eval: EvalParams::default(),
        }
    }
}

/// Profiles every `(model, resolution, stride)` combination over `videos`.
///
/// `make_detector` builds a fresh detector per grid point. A video that fails
/// is skipped with a warning; a grid point with no successful video is left
/// out of the table. Axes are normalized across the finished table and
/// scored with neutral weights.
pub fn build_table<F>(
    models: &[ModelSpec],
    grid: &GridSpec,
    videos: &[GestureTimeline],
    mut make_detector: F,
    power: &mut PowerSource,
    cfg: &ProfileConfig,
) -> Result<Vec<AceProfile>>
where
    F: FnMut(&ModelSpec, &ConfigPoint) -> Result<Box<dyn Detector>>,
{
    if models.is_empty() || grid.resolutions.is_empty() || grid.strides.is_empty() {
        return Err(invalid("model, resolution and stride lists must be non-empty"));
    }
    if videos.is_empty() {
        return Err(Error::Empty("video set"));
    }

    let mut raws = Vec::new();
    for model in models {
        for &resolution in &grid.resolutions {
            for &stride in &grid.strides {
                let point = ConfigPoint::new(model.id.clone(), resolution, stride);
                point.validate()?;
                let runner_cfg = RunnerConfig {
                    decay: cfg.decay,
                    tracker: model.tracker,
                    eval: cfg.eval,
                };
                let mut detector = make_detector(model, &point)?;
                match profile_point(&mut *detector, model, &point, videos, power, &runner_cfg, cfg)? {
                    Some(raw) => raws.push(AceProfile::from_raw(point, raw)),
                    None => warn!("{point}: no video completed; omitted from the table"),
                }
            }
        }
    }
    if raws.is_empty() {
        return Err(Error::Empty("profile table (every grid point failed)"));
    }
    normalize_table(&raws, &AceWeights::neutral())
}

fn profile_point(
    detector: &mut dyn Detector,
    model: &ModelSpec,
    point: &ConfigPoint,
    videos: &[GestureTimeline],
    power: &mut PowerSource,
    runner_cfg: &RunnerConfig,
    cfg: &ProfileConfig,
) -> Result<Option<RawProfile>> {
    let mut a_fr = 0.0;
    let mut a_ev = 0.0;
    let mut a_blend = 0.0;
    let mut ok = 0usize;
    let mut latencies = Vec::new();
    let mut joules = 0.0;
    let mut busy = 0.0;
    let mut frames = 0usize;

    for video in videos {
        match run_one_video(detector, video, point, power, runner_cfg) {
            Ok(run) => {
                ok += 1;
                a_fr += run.metrics.frame_f1;
                a_ev += run.metrics.event_f1;
                a_blend += run.metrics.blended;
                latencies.extend(run.calls.iter().map(|c| c.latency_s));
                joules += run.total_energy();
                busy += run.busy_s;
                frames += run.n_src;
            }
            Err(e) => warn!("{point} on video '{}': {e}; skipped", video.id),
        }
    }
    if ok == 0 {
        return Ok(None);
    }

    let measured = if latencies.len() > cfg.warmup_calls {
        &latencies[cfg.warmup_calls..]
    } else {
        &latencies[..]
    };
    let l_mean = if measured.is_empty() {
        0.0
    } else {
        measured.iter().sum::<f64>() / measured.len() as f64
    };
    let n = ok as f64;
    Ok(Some(RawProfile {
        a_fr: a_fr / n,
        a_ev: a_ev / n,
        a_blend: a_blend / n,
        l_mean,
        l_p90: nearest_rank(measured, 0.9).unwrap_or(0.0),
        l_eff: effective_latency(l_mean, point.stride)?,
        g640: model.g640,
        c_flop: model.g640.map(|g| effective_flops(g, point.resolution, point.stride)),
        e_per_frame: joules / frames as f64,
        mean_excess_power: if busy > 0.0 { joules / busy } else { 0.0 },
    }))
}
