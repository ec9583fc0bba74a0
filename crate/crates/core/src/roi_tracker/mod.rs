//! Kalman-gated single-hand ROI tracking.
//!
//! While a track is active the detector only sees a square crop around the
//! predicted hand box. A detection that overlaps the prediction well enough
//! updates the filter; a poor overlap re-initializes it. Consecutive misses
//! beyond the budget drop the tracker back to full-frame acquisition.

mod kalman;

use serde::{Deserialize, Serialize};

pub use kalman::{KalmanState, NoiseParams};

use crate::detector::{best_detection, processed_pixels, Detector, FrameView, Region};
use crate::error::{invalid, Result};
use crate::temporal_metrics::{iou, BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    pub roi_scale: f64,
    pub iou_gate: f64,
    pub miss_budget: u32,
    #[serde(default)]
    pub noise: NoiseParams,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            roi_scale: 1.8,
            iou_gate: 0.5,
            miss_budget: 8,
            noise: NoiseParams::default(),
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.roi_scale >= 1.0) {
            return Err(invalid(format!("ROI scale {} must be at least 1", self.roi_scale)));
        }
        if !(self.iou_gate > 0.0 && self.iou_gate < 1.0) {
            return Err(invalid(format!("IoU gate {} outside (0, 1)", self.iou_gate)));
        }
        if self.miss_budget == 0 {
            return Err(invalid("miss budget must be positive"));
        }
        Ok(())
    }
}

/// Square crop around a predicted box, clipped to the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub region: Region,
    /// Requested side before clipping.
    pub side: f64,
    pub clipped: bool,
}

/// Square of side `s·max(w, h)` centered on `b`.
///
/// A square that spills over an edge is first shifted inward; only a square
/// larger than the frame itself gets truncated.
pub fn make_roi(b: &BBox, scale: f64, frame_width: f64, frame_height: f64) -> Result<Roi> {
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(invalid(format!("degenerate box {}×{}", b.w, b.h)));
    }
    if !(scale >= 1.0) {
        return Err(invalid(format!("ROI scale {scale} must be at least 1")));
    }
    let side = scale * b.w.max(b.h);
    let axis = |center: f64, limit: f64| -> (f64, f64, bool) {
        let extent = side.min(limit);
        let start = (center - side / 2.0).clamp(0.0, (limit - extent).max(0.0));
        let moved = start != center - side / 2.0 || extent < side;
        (start, extent, moved)
    };
    let (x0, width, cx) = axis(b.cx, frame_width);
    let (y0, height, cy) = axis(b.cy, frame_height);
    Ok(Roi {
        region: Region { x0, y0, width, height },
        side,
        clipped: cx || cy,
    })
}

pub fn kf_predict(state: &mut KalmanState, noise: &NoiseParams) -> BBox {
    state.predict(noise);
    state.bbox()
}

/// Best detection inside `roi`, translated back to full-frame coordinates.
pub fn detect_in_roi<D: Detector + ?Sized>(
    detector: &mut D,
    frame: &FrameView<'_>,
    region: &Region,
    resolution: u32,
) -> Result<(Option<Detection>, f64, f64)> {
    let out = detector.detect(frame, region, resolution)?;
    let best = best_detection(&out.detections).map(|d| Detection {
        frame: frame.index,
        bbox: region.to_full_frame(&d.bbox),
        ..d
    });
    Ok((best, out.latency_s, out.energy_j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOutcome {
    Updated,
    Reinitialized,
}

/// Kalman update when the measurement overlaps the prediction by at least
/// the gate, re-initialization from the measurement otherwise.
pub fn gate_and_update(
    state: &mut KalmanState,
    predicted: &BBox,
    measured: &BBox,
    params: &TrackerParams,
) -> GateOutcome {
    if iou(measured, predicted) >= params.iou_gate {
        state.update(measured, &params.noise);
        GateOutcome::Updated
    } else {
        *state = KalmanState::init(measured, &params.noise);
        GateOutcome::Reinitialized
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Inactive,
    Active,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub status: TrackStatus,
    pub kalman: Option<KalmanState>,
    pub misses: u32,
}

impl Default for TrackState {
    fn default() -> Self {
        Self {
            status: TrackStatus::Inactive,
            kalman: None,
            misses: 0,
        }
    }
}

/// Per-frame tracker output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: Option<BBox>,
    pub class_id: Option<u32>,
    pub confidence: Option<f64>,
    /// True when this frame was processed inside a tracked ROI.
    pub track_active: bool,
    pub roi: Option<Roi>,
    pub predicted: Option<BBox>,
    pub gate: Option<GateOutcome>,
    pub processed_pixels: f64,
    pub latency_s: f64,
    pub energy_j: f64,
}

impl FrameLog {
    pub fn detection(&self) -> Option<Detection> {
        Some(Detection {
            frame: self.frame,
            bbox: self.bbox?,
            class_id: self.class_id?,
            confidence: self.confidence?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RoiTracker {
    params: TrackerParams,
    state: TrackState,
}

impl RoiTracker {
    pub fn new(params: TrackerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: TrackState::default(),
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = TrackState::default();
    }

    /// Processes one frame: full-frame acquisition while inactive, ROI
    /// detection while active.
    pub fn step<D: Detector + ?Sized>(
        &mut self,
        frame: &FrameView<'_>,
        detector: &mut D,
        resolution: u32,
    ) -> Result<FrameLog> {
        let (fw, fh) = (frame.width(), frame.height());
        let mut log = FrameLog {
            frame: frame.index,
            bbox: None,
            class_id: None,
            confidence: None,
            track_active: false,
            roi: None,
            predicted: None,
            gate: None,
            processed_pixels: 0.0,
            latency_s: 0.0,
            energy_j: 0.0,
        };

        let active = match (self.state.status, self.state.kalman.as_mut()) {
            (TrackStatus::Active, Some(kf)) => Some(kf),
            _ => None,
        };

        let Some(kf) = active else {
            let region = frame.full_region();
            let (found, lat, energy) = detect_in_roi(detector, frame, &region, resolution)?;
            log.processed_pixels = processed_pixels(&region, fw, fh, resolution);
            log.latency_s = lat;
            log.energy_j = energy;
            if let Some(d) = found.filter(|d| d.bbox.is_valid()) {
                self.state = TrackState {
                    status: TrackStatus::Active,
                    kalman: Some(KalmanState::init(&d.bbox, &self.params.noise)),
                    misses: 0,
                };
                set_detection(&mut log, &d, fw, fh);
            }
            return Ok(log);
        };

        log.track_active = true;
        let predicted = kf_predict(kf, &self.params.noise);
        log.predicted = Some(predicted);
        let roi = make_roi(&predicted, self.params.roi_scale, fw, fh)?;
        log.roi = Some(roi);
        let (found, lat, energy) = detect_in_roi(detector, frame, &roi.region, resolution)?;
        log.processed_pixels = processed_pixels(&roi.region, fw, fh, resolution);
        log.latency_s = lat;
        log.energy_j = energy;

        match found.filter(|d| d.bbox.is_valid()) {
            Some(d) => {
                log.gate = Some(gate_and_update(kf, &predicted, &d.bbox, &self.params));
                self.state.misses = 0;
                set_detection(&mut log, &d, fw, fh);
            }
            None => {
                self.state.misses += 1;
                if self.state.misses >= self.params.miss_budget {
                    self.state = TrackState::default();
                }
            }
        }
        Ok(log)
    }
}

fn set_detection(log: &mut FrameLog, d: &Detection, fw: f64, fh: f64) {
    if let Some(b) = d.bbox.clip(fw, fh) {
        log.bbox = Some(b);
        log.class_id = Some(d.class_id);
        log.confidence = Some(d.confidence);
    }
}
