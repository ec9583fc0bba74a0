use std::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detector::{processed_pixels, Detector, DetectorOutput, FrameView, Region};
use crate::error::{invalid, Result};
use crate::roi_tracker::TrackerParams;
use crate::temporal_metrics::{BBox, Detection};

const REFERENCE_PIXELS: f64 = 640.0 * 640.0;

/// Behavior of one synthetic detector tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCalibration {
    pub model: String,
    /// Per-call latency on a full 640 px input.
    pub base_latency_ms: f64,
    /// Per-call energy on a full 640 px input.
    pub energy_mj: f64,
    pub detect_prob: f64,
    /// Detection probability lost per halving of resolution below 640 px.
    #[serde(default)]
    pub low_res_penalty: f64,
    #[serde(default)]
    pub localization_noise_px: f64,
    #[serde(default = "default_conf_min")]
    pub conf_min: f64,
    #[serde(default = "default_conf_max")]
    pub conf_max: f64,
    /// Chance per call of a spurious box somewhere in the region.
    #[serde(default)]
    pub false_positive_rate: f64,
    #[serde(default)]
    pub misclass_rate: f64,
    #[serde(default = "default_classes")]
    pub num_classes: u32,
    /// Relative standard deviation of per-call latency.
    #[serde(default)]
    pub latency_jitter: f64,
    #[serde(default)]
    pub g640: Option<f64>,
    /// Runs this tier behind the ROI tracker.
    #[serde(default)]
    pub tracker: Option<TrackerParams>,
}

fn default_conf_min() -> f64 {
    0.6
}

fn default_conf_max() -> f64 {
    0.95
}

fn default_classes() -> u32 {
    2
}

impl TierCalibration {
    /// Noise-free tier that always finds every box.
    pub fn perfect(model: impl Into<String>, base_latency_ms: f64, energy_mj: f64) -> Self {
        Self {
            model: model.into(),
            base_latency_ms,
            energy_mj,
            detect_prob: 1.0,
            low_res_penalty: 0.0,
            localization_noise_px: 0.0,
            conf_min: 0.9,
            conf_max: 0.9,
            false_positive_rate: 0.0,
            misclass_rate: 0.0,
            num_classes: 2,
            latency_jitter: 0.0,
            g640: None,
            tracker: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{}: {name} {v} outside [0, 1]", self.model)))
            }
        };
        unit("detect_prob", self.detect_prob)?;
        unit("low_res_penalty", self.low_res_penalty)?;
        unit("false_positive_rate", self.false_positive_rate)?;
        unit("misclass_rate", self.misclass_rate)?;
        unit("conf_min", self.conf_min)?;
        unit("conf_max", self.conf_max)?;
        if self.conf_min > self.conf_max {
            return Err(invalid(format!("{}: conf_min above conf_max", self.model)));
        }
        if !(self.base_latency_ms > 0.0) || !(self.energy_mj > 0.0) {
            return Err(invalid(format!("{}: latency and energy must be positive", self.model)));
        }
        if !(self.localization_noise_px >= 0.0) || !(self.latency_jitter >= 0.0) {
            return Err(invalid(format!("{}: noise levels must be non-negative", self.model)));
        }
        if self.num_classes == 0 {
            return Err(invalid(format!("{}: at least one class", self.model)));
        }
        if let Some(t) = &self.tracker {
            t.validate()?;
        }
        Ok(())
    }

    /// Per-call latency in seconds for `pixels` model-input pixels.
    pub fn latency_s(&self, pixels: f64) -> f64 {
        self.base_latency_ms * 1e-3 * pixels / REFERENCE_PIXELS
    }

    /// Per-call energy in joules for `pixels` model-input pixels.
    pub fn energy_j(&self, pixels: f64) -> f64 {
        self.energy_mj * 1e-3 * pixels / REFERENCE_PIXELS
    }

    pub fn detect_prob_at(&self, resolution: u32) -> f64 {
        let halvings = (640.0 / resolution as f64).log2().max(0.0);
        (self.detect_prob * (1.0 - self.low_res_penalty * halvings)).clamp(0.0, 1.0)
    }
}

/// FNV-1a over the byte strings that identify a call.
fn call_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Fnv1a::default();
    for p in parts {
        h.write(p);
        h.write(&[0xff]);
    }
    h.finish()
}

struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv1a {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// Detector oracle driven by ground truth and a tier calibration.
///
/// Randomness is keyed on (seed, model, video, frame, resolution), so a
/// frame gets the same draws whatever crop it is shown through and however
/// many calls came before it.
#[derive(Debug, Clone)]
pub struct SyntheticDetector {
    calib: TierCalibration,
    seed: u64,
    latency_factor: f64,
}

impl SyntheticDetector {
    pub fn new(calib: TierCalibration, seed: u64) -> Result<Self> {
        calib.validate()?;
        Ok(Self {
            calib,
            seed,
            latency_factor: 1.0,
        })
    }

    pub fn calibration(&self) -> &TierCalibration {
        &self.calib
    }

    /// Multiplies simulated latency, e.g. to inject a slowdown.
    pub fn set_latency_factor(&mut self, factor: f64) {
        self.latency_factor = factor.max(0.0);
    }

    fn rng(&self, frame: &FrameView<'_>, resolution: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(call_seed(&[
            &self.seed.to_le_bytes(),
            self.calib.model.as_bytes(),
            frame.timeline.id.as_bytes(),
            &(frame.index as u64).to_le_bytes(),
            &resolution.to_le_bytes(),
        ]))
    }
}

impl Detector for SyntheticDetector {
    fn detect(&mut self, frame: &FrameView<'_>, region: &Region, resolution: u32) -> Result<DetectorOutput> {
        if resolution == 0 {
            return Err(invalid("resolution must be positive"));
        }
        let c = &self.calib;
        let pixels = processed_pixels(region, frame.width(), frame.height(), resolution);
        let mut rng = self.rng(frame, resolution);

        let jitter = if c.latency_jitter > 0.0 {
            Normal::new(1.0, c.latency_jitter)
                .map_err(|e| invalid(e.to_string()))?
                .sample(&mut rng)
                .max(0.1)
        } else {
            1.0
        };
        let latency_s = c.latency_s(pixels) * jitter * self.latency_factor;
        let energy_j = c.energy_j(pixels);

        let noise = if c.localization_noise_px > 0.0 {
            Some(Normal::new(0.0, c.localization_noise_px).map_err(|e| invalid(e.to_string()))?)
        } else {
            None
        };
        let p_detect = c.detect_prob_at(resolution);
        let area = region.as_bbox();

        let mut detections = Vec::new();
        for gt in frame.timeline.gt_at(frame.index) {
            // draws are taken unconditionally so crops do not shift the stream
            let hit = rng.random::<f64>() < p_detect;
            let (dx, dy, dw, dh) = match &noise {
                Some(n) => (n.sample(&mut rng), n.sample(&mut rng), 0.5 * n.sample(&mut rng), 0.5 * n.sample(&mut rng)),
                None => (0.0, 0.0, 0.0, 0.0),
            };
            let mislabel = rng.random::<f64>() < c.misclass_rate;
            let shift = rng.random_range(1..c.num_classes.max(2));
            let confidence = c.conf_min + (c.conf_max - c.conf_min) * rng.random::<f64>();
            if !hit || gt.bbox.intersection(&area).is_none() {
                continue;
            }
            let class_id = if mislabel && c.num_classes > 1 {
                (gt.class_id + shift) % c.num_classes
            } else {
                gt.class_id
            };
            let jittered = BBox::new(gt.bbox.cx + dx, gt.bbox.cy + dy, (gt.bbox.w + dw).max(1.0), (gt.bbox.h + dh).max(1.0));
            if let Some(local) = region.crop(&jittered) {
                detections.push(Detection {
                    frame: frame.index,
                    bbox: local,
                    class_id,
                    confidence,
                });
            }
        }

        if rng.random::<f64>() < c.false_positive_rate {
            let side = rng.random_range(0.05..0.25) * region.width.min(region.height);
            let cx = region.x0 + rng.random::<f64>() * region.width;
            let cy = region.y0 + rng.random::<f64>() * region.height;
            let bbox = BBox::new(cx, cy, side.max(1.0), side.max(1.0));
            if let Some(local) = region.crop(&bbox) {
                detections.push(Detection {
                    frame: frame.index,
                    bbox: local,
                    class_id: rng.random_range(0..c.num_classes),
                    confidence: rng.random_range(0.05..0.5),
                });
            }
        }

        Ok(DetectorOutput {
            detections,
            latency_s,
            energy_j,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal_metrics::{GestureTimeline, GtBox};

    fn one_box() -> GestureTimeline {
        let mut t = GestureTimeline::new("v", 640.0, 480.0, 30.0, 3);
        t.push_box(1, GtBox { bbox: BBox::new(200.0, 200.0, 80.0, 60.0), class_id: 1 });
        t
    }

    #[test]
    fn perfect_oracle_returns_ground_truth() {
        let t = one_box();
        let mut d = SyntheticDetector::new(TierCalibration::perfect("m", 20.0, 100.0), 1).unwrap();
        let view = FrameView { timeline: &t, index: 1 };
        let out = d.detect(&view, &view.full_region(), 640).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.detections[0].bbox, BBox::new(200.0, 200.0, 80.0, 60.0));
        assert_eq!(out.detections[0].class_id, 1);
    }

    #[test]
    fn region_away_from_box_sees_nothing() {
        let t = one_box();
        let mut d = SyntheticDetector::new(TierCalibration::perfect("m", 20.0, 100.0), 1).unwrap();
        let view = FrameView { timeline: &t, index: 1 };
        let far = Region { x0: 400.0, y0: 300.0, width: 100.0, height: 100.0 };
        assert!(d.detect(&view, &far, 640).unwrap().detections.is_empty());
    }

    #[test]
    fn cost_scales_with_pixels() {
        let t = one_box();
        let mut d = SyntheticDetector::new(TierCalibration::perfect("m", 20.0, 100.0), 1).unwrap();
        let view = FrameView { timeline: &t, index: 0 };
        let full = d.detect(&view, &view.full_region(), 640).unwrap();
        let half = Region { x0: 0.0, y0: 0.0, width: 320.0, height: 480.0 };
        let h = d.detect(&view, &half, 640).unwrap();
        assert!((h.energy_j * 2.0 - full.energy_j).abs() < 1e-15);
        assert!((full.latency_s - 0.020).abs() < 1e-15);
        let low = d.detect(&view, &view.full_region(), 160).unwrap();
        assert!((full.latency_s / low.latency_s - 16.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let t = one_box();
        let mut calib = TierCalibration::perfect("m", 20.0, 100.0);
        calib.detect_prob = 0.5;
        calib.localization_noise_px = 3.0;
        calib.latency_jitter = 0.1;
        let view = FrameView { timeline: &t, index: 1 };
        let mut a = SyntheticDetector::new(calib.clone(), 9).unwrap();
        let mut b = SyntheticDetector::new(calib, 9).unwrap();
        for _ in 0..3 {
            assert_eq!(
                a.detect(&view, &view.full_region(), 320).unwrap(),
                b.detect(&view, &view.full_region(), 320).unwrap()
            );
        }
    }
}
