//! Detector abstraction shared by the profiler, the ROI tracker and the simulator.
//!
//! Frames are descriptors (a timeline plus a frame index) rather than decoded
//! images. A detector sees a rectangular region of the frame and reports
//! detections in region-local coordinates together with the cost of the call.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::temporal_metrics::{BBox, Detection, GestureTimeline};

/// Axis-aligned region in full-frame pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn full(width: f64, height: f64) -> Self {
        Self {
            x0: 0.0,
            y0: 0.0,
            width,
            height,
        }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn as_bbox(&self) -> BBox {
        BBox::from_corners(self.x0, self.y0, self.x0 + self.width, self.y0 + self.height)
    }

    /// Part of a full-frame box visible in this region, in region-local coordinates.
    pub fn crop(&self, bbox: &BBox) -> Option<BBox> {
        bbox.intersection(&self.as_bbox())
            .map(|b| b.translate(-self.x0, -self.y0))
    }

    pub fn to_full_frame(&self, local: &BBox) -> BBox {
        local.translate(self.x0, self.y0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub timeline: &'a GestureTimeline,
    pub index: usize,
}

impl FrameView<'_> {
    pub fn width(&self) -> f64 {
        self.timeline.width
    }

    pub fn height(&self) -> f64 {
        self.timeline.height
    }

    pub fn full_region(&self) -> Region {
        Region::full(self.width(), self.height())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectorOutput {
    /// Detections in region-local coordinates.
    pub detections: Vec<Detection>,
    pub latency_s: f64,
    pub energy_j: f64,
}

pub trait Detector {
    fn detect(&mut self, frame: &FrameView<'_>, region: &Region, resolution: u32)
        -> Result<DetectorOutput>;
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn detect(
        &mut self,
        frame: &FrameView<'_>,
        region: &Region,
        resolution: u32,
    ) -> Result<DetectorOutput> {
        (**self).detect(frame, region, resolution)
    }
}

/// Model-input pixels spent on a region: a full frame letterboxes to
/// `resolution²`, a crop costs its share of the frame area.
pub fn processed_pixels(region: &Region, frame_width: f64, frame_height: f64, resolution: u32) -> f64 {
    let r = resolution as f64;
    r * r * region.area() / (frame_width * frame_height)
}

/// Highest-confidence detection, ties broken by lower class id.
pub fn best_detection(detections: &[Detection]) -> Option<Detection> {
    detections
        .iter()
        .copied()
        .max_by(|a, b| {
            a.confidence
                .total_cmp(&b.confidence)
                .then(b.class_id.cmp(&a.class_id))
        })
}

/// Replays recorded full-frame detections, cropped to whatever region is asked for.
#[derive(Debug, Clone, Default)]
pub struct ReplayDetector {
    by_frame: BTreeMap<usize, Vec<Detection>>,
}

impl ReplayDetector {
    pub fn new(detections: impl IntoIterator<Item = Detection>) -> Self {
        let mut by_frame: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            by_frame.entry(d.frame).or_default().push(d);
        }
        Self { by_frame }
    }
}

impl Detector for ReplayDetector {
    fn detect(
        &mut self,
        frame: &FrameView<'_>,
        region: &Region,
        _resolution: u32,
    ) -> Result<DetectorOutput> {
        let detections = self
            .by_frame
            .get(&frame.index)
            .into_iter()
            .flatten()
            .filter_map(|d| {
                region.crop(&d.bbox).map(|bbox| Detection {
                    frame: frame.index,
                    bbox,
                    ..*d
                })
            })
            .collect();
        Ok(DetectorOutput {
            detections,
            ..Default::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_and_translate_back() {
        let region = Region { x0: 50.0, y0: 50.0, width: 100.0, height: 100.0 };
        let local = BBox::new(10.0, 10.0, 4.0, 4.0);
        let full = region.to_full_frame(&local);
        assert_eq!((full.cx, full.cy), (60.0, 60.0));
        assert_eq!(region.crop(&full).unwrap(), local);
        assert!(region.crop(&BBox::new(400.0, 400.0, 4.0, 4.0)).is_none());
    }

    #[test]
    fn pixel_model() {
        let full = Region::full(640.0, 480.0);
        assert_eq!(processed_pixels(&full, 640.0, 480.0, 640), 640.0 * 640.0);
        let half = Region { x0: 0.0, y0: 0.0, width: 320.0, height: 480.0 };
        assert_eq!(processed_pixels(&half, 640.0, 480.0, 320), 320.0 * 320.0 / 2.0);
    }

    #[test]
    fn replay_crops_to_region() {
        let t = GestureTimeline::new("t", 640.0, 480.0, 30.0, 4);
        let d = Detection { frame: 2, bbox: BBox::new(100.0, 100.0, 20.0, 20.0), class_id: 3, confidence: 0.7 };
        let mut replay = ReplayDetector::new([d]);
        let view = FrameView { timeline: &t, index: 2 };
        let full = replay.detect(&view, &view.full_region(), 640).unwrap();
        assert_eq!(full.detections, vec![d]);
        let roi = Region { x0: 80.0, y0: 80.0, width: 50.0, height: 50.0 };
        let out = replay.detect(&view, &roi, 640).unwrap();
        assert_eq!(out.detections[0].bbox, BBox::new(20.0, 20.0, 20.0, 20.0));
        let empty = replay.detect(&FrameView { timeline: &t, index: 1 }, &roi, 640).unwrap();
        assert!(empty.detections.is_empty());
    }
}
