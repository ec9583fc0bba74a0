use serde::{Deserialize, Serialize};

use super::{ConfigPoint, EnergyEstimate, PowerSource};
use crate::detector::{processed_pixels, Detector, FrameView};
use crate::error::{invalid, Result};
use crate::roi_tracker::{detect_in_roi, Roi, RoiTracker, TrackerParams};
use crate::temporal_metrics::{evaluate, Detection, EvalParams, GestureTimeline, HoldLast, MetricsReport, DEFAULT_DECAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Confidence decay per skipped frame for held detections.
    pub decay: f64,
    /// Enables ROI tracking with these parameters.
    pub tracker: Option<TrackerParams>,
    pub eval: EvalParams,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            decay: DEFAULT_DECAY,
            tracker: None,
            eval: EvalParams::default(),
        }
    }
}

/// One detector invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub frame: usize,
    pub latency_s: f64,
    pub energy_j: f64,
    pub processed_pixels: f64,
    pub track_active: bool,
    pub roi: Option<Roi>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: usize,
    /// Detections reported for this frame, fresh or held.
    pub detections: Vec<Detection>,
    pub call: Option<CallRecord>,
}

/// Strided detection over a frame sequence with hold-last filling and an
/// optional ROI tracker. Keeps its state across configuration changes so a
/// controller can switch operating points mid-stream.
#[derive(Debug, Clone)]
pub struct StreamRunner {
    hold: HoldLast,
    tracker: Option<RoiTracker>,
    next_due: usize,
}

impl StreamRunner {
    pub fn new(cfg: &RunnerConfig) -> Result<Self> {
        if !(cfg.decay >= 0.0) {
            return Err(invalid(format!("decay {} must be non-negative", cfg.decay)));
        }
        let tracker = cfg.tracker.map(RoiTracker::new).transpose()?;
        Ok(Self {
            hold: HoldLast::new(cfg.decay),
            tracker,
            next_due: 0,
        })
    }

    pub fn tracker(&self) -> Option<&RoiTracker> {
        self.tracker.as_ref()
    }

    /// Enables or disables ROI tracking; a new tracker starts inactive.
    pub fn set_tracker(&mut self, params: Option<TrackerParams>) -> Result<()> {
        match (params, &self.tracker) {
            (None, _) => self.tracker = None,
            (Some(p), Some(t)) if *t.params() == p => {}
            (Some(p), _) => self.tracker = Some(RoiTracker::new(p)?),
        }
        Ok(())
    }

    pub fn process_frame<D: Detector + ?Sized>(
        &mut self,
        view: &FrameView<'_>,
        detector: &mut D,
        point: &ConfigPoint,
    ) -> Result<FrameResult> {
        let frame = view.index;
        if frame < self.next_due {
            return Ok(FrameResult {
                frame,
                detections: self.hold.fill(frame),
                call: None,
            });
        }
        self.next_due = frame + point.stride.max(1) as usize;

        let (found, call) = match self.tracker.as_mut() {
            Some(tracker) => {
                let log = tracker.step(view, detector, point.resolution)?;
                let call = CallRecord {
                    frame,
                    latency_s: log.latency_s,
                    energy_j: log.energy_j,
                    processed_pixels: log.processed_pixels,
                    track_active: log.track_active,
                    roi: log.roi,
                };
                (log.detection(), call)
            }
            None => {
                let region = view.full_region();
                let (found, latency_s, energy_j) = detect_in_roi(detector, view, &region, point.resolution)?;
                let found = found.and_then(|d| {
                    d.bbox.clip(view.width(), view.height()).map(|bbox| Detection { bbox, ..d })
                });
                let call = CallRecord {
                    frame,
                    latency_s,
                    energy_j,
                    processed_pixels: processed_pixels(&region, view.width(), view.height(), point.resolution),
                    track_active: false,
                    roi: None,
                };
                (found, call)
            }
        };
        let detections = self.hold.observe(frame, found.into_iter().collect());
        Ok(FrameResult {
            frame,
            detections,
            call: Some(call),
        })
    }
}

/// Outcome of one grid point on one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRun {
    pub metrics: MetricsReport,
    pub predictions: Vec<Detection>,
    pub calls: Vec<CallRecord>,
    pub n_src: usize,
    pub busy_s: f64,
    pub energy: EnergyEstimate,
}

impl VideoRun {
    pub fn total_pixels(&self) -> f64 {
        self.calls.iter().map(|c| c.processed_pixels).sum()
    }

    pub fn total_energy(&self) -> f64 {
        self.energy.e_per_frame * self.n_src as f64
    }
}

/// Runs `point` over every frame of `timeline` and scores the result.
pub fn run_one_video<D: Detector + ?Sized>(
    detector: &mut D,
    timeline: &GestureTimeline,
    point: &ConfigPoint,
    power: &mut PowerSource,
    cfg: &RunnerConfig,
) -> Result<VideoRun> {
    point.validate()?;
    let n_src = timeline.total_frames();
    if n_src == 0 {
        return Err(invalid(format!("video '{}' has no frames", timeline.id)));
    }
    let mut runner = StreamRunner::new(cfg)?;
    let mut predictions = Vec::new();
    let mut calls = Vec::new();
    for index in 0..n_src {
        let view = FrameView { timeline, index };
        let r = runner.process_frame(&view, detector, point)?;
        predictions.extend(r.detections);
        calls.extend(r.call);
    }
    let metrics = evaluate(&predictions, &timeline.ground_truth(), &timeline.events, &cfg.eval)?;
    let busy_s: f64 = calls.iter().map(|c| c.latency_s).sum();
    let reported: f64 = calls.iter().map(|c| c.energy_j).sum();
    let energy = power.measure(busy_s, reported, n_src)?;
    Ok(VideoRun {
        metrics,
        predictions,
        calls,
        n_src,
        busy_s,
        energy,
    })
}
