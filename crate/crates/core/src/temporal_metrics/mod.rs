//! Frame- and event-level detection metrics for temporally annotated streams.

mod events;
mod frames;
mod impute;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use events::{event_f1, EventScores};
pub use frames::{frame_metrics, FrameScores};
pub use impute::{hold_last_impute, HoldLast, DEFAULT_DECAY};

/// Axis-aligned box in center form, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn x0(&self) -> f64 {
        self.cx - self.w / 2.0
    }
    pub fn y0(&self) -> f64 {
        self.cy - self.h / 2.0
    }
    pub fn x1(&self) -> f64 {
        self.cx + self.w / 2.0
    }
    pub fn y1(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Intersection with another box, if it has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0().max(other.x0());
        let y0 = self.y0().max(other.y0());
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
    }

    /// Clips to `[0, width] × [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        self.intersection(&BBox::from_corners(0.0, 0.0, width, height))
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x1().min(b.x1()) - a.x0().max(b.x0())).max(0.0);
    let ih = (a.y1().min(b.y1()) - a.y0().max(b.y0())).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub bbox: BBox,
    pub class_id: u32,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub bbox: BBox,
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame: usize,
    pub entries: Vec<GtBox>,
}

/// Inclusive frame span of one gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureEvent {
    #[serde(rename = "class")]
    pub class_id: u32,
    pub start: usize,
    pub end: usize,
}

impl GestureEvent {
    pub fn new(class_id: u32, start: usize, end: usize) -> Self {
        Self { class_id, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }
}

/// Frame-indexed ground truth plus event spans for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TimelineFile", into = "TimelineFile")]
pub struct GestureTimeline {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub fps: f64,
    frames: Vec<Vec<GtBox>>,
    pub events: Vec<GestureEvent>,
}

impl GestureTimeline {
    pub fn new(id: impl Into<String>, width: f64, height: f64, fps: f64, total_frames: usize) -> Self {
        Self {
            id: id.into(),
            width,
            height,
            fps,
            frames: vec![Vec::new(); total_frames],
            events: Vec::new(),
        }
    }

    pub fn total_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn gt_at(&self, frame: usize) -> &[GtBox] {
        self.frames.get(frame).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn push_box(&mut self, frame: usize, gt: GtBox) {
        self.frames[frame].push(gt);
    }

    /// Non-empty ground-truth frames.
    pub fn ground_truth(&self) -> Vec<GroundTruthFrame> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_empty())
            .map(|(frame, entries)| GroundTruthFrame {
                frame,
                entries: entries.clone(),
            })
            .collect()
    }

    pub fn active_frames(&self) -> usize {
        self.frames.iter().filter(|f| !f.is_empty()).count()
    }

    /// Fraction of frames that belong to a gesture event.
    pub fn duty_cycle(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        let covered: usize = self.events.iter().map(GestureEvent::len).sum();
        covered as f64 / self.frames.len() as f64
    }
}

#[derive(Serialize, Deserialize)]
struct TimelineFile {
    id: String,
    width: f64,
    height: f64,
    fps: f64,
    total_frames: usize,
    events: Vec<GestureEvent>,
    ground_truth: Vec<GroundTruthFrame>,
}

impl From<TimelineFile> for GestureTimeline {
    fn from(f: TimelineFile) -> Self {
        let mut t = GestureTimeline::new(f.id, f.width, f.height, f.fps, f.total_frames);
        for gt in f.ground_truth {
            if gt.frame < f.total_frames {
                t.frames[gt.frame].extend(gt.entries);
            }
        }
        t.events = f.events;
        t
    }
}

impl From<GestureTimeline> for TimelineFile {
    fn from(t: GestureTimeline) -> Self {
        TimelineFile {
            ground_truth: t.ground_truth(),
            total_frames: t.total_frames(),
            id: t.id,
            width: t.width,
            height: t.height,
            fps: t.fps,
            events: t.events,
        }
    }
}

/// TP/FP/FN tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`, equal to `2PR/(P+R)`; 0 when there is nothing to score.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `λ·a_ev + (1−λ)·a_fr`.
pub fn blended_accuracy(a_ev: f64, a_fr: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(lambda * a_ev + (1.0 - lambda) * a_fr)
}

pub const DEFAULT_LAMBDA: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub iou_thresh: f64,
    pub conf_thresh: f64,
    pub lambda: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_thresh: 0.5,
            conf_thresh: 0.25,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frame_precision: f64,
    pub frame_recall: f64,
    pub frame_f1: f64,
    pub event_f1: f64,
    pub blended: f64,
    pub frame_counts: Counts,
    pub event_counts: Counts,
}

/// Frame metrics, event F1 and their blend in one pass.
pub fn evaluate(
    preds: &[Detection],
    gt: &[GroundTruthFrame],
    events: &[GestureEvent],
    params: &EvalParams,
) -> Result<MetricsReport> {
    let fr = frame_metrics(preds, gt, params.iou_thresh, params.conf_thresh);
    let ev = event_f1(preds, events, params.conf_thresh);
    Ok(MetricsReport {
        frame_precision: fr.precision,
        frame_recall: fr.recall,
        frame_f1: fr.f1,
        event_f1: ev.f1,
        blended: blended_accuracy(ev.f1, fr.f1, params.lambda)?,
        frame_counts: fr.counts,
        event_counts: ev.counts,
    })
}
