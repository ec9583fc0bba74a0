use std::collections::BTreeMap;

use super::Detection;
use crate::error::{invalid, Result};

/// Per-frame confidence decay rate for held predictions.
pub const DEFAULT_DECAY: f64 = 0.25;

/// Streaming hold-last imputer.
///
/// Processed frames go through [`HoldLast::observe`]; skipped frames are
/// filled by [`HoldLast::fill`] with the last processed frame's predictions at
/// confidence `c·exp(−gamma·Δframes)`.
#[derive(Debug, Clone)]
pub struct HoldLast {
    gamma: f64,
    last: Option<(usize, Vec<Detection>)>,
}

impl HoldLast {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, last: None }
    }

    pub fn observe(&mut self, frame: usize, detections: Vec<Detection>) -> Vec<Detection> {
        let out: Vec<Detection> = detections
            .into_iter()
            .map(|d| Detection { frame, ..d })
            .collect();
        self.last = Some((frame, out.clone()));
        out
    }

    pub fn fill(&self, frame: usize) -> Vec<Detection> {
        let Some((source, held)) = &self.last else {
            return Vec::new();
        };
        if frame < *source {
            return Vec::new();
        }
        let decay = (-self.gamma * (frame - source) as f64).exp();
        held.iter()
            .map(|d| Detection {
                frame,
                confidence: d.confidence * decay,
                ..*d
            })
            .collect()
    }

    pub fn reset(&mut self) {
        self.last = None;
    }
}

/// Densifies detections produced on every `stride`-th frame.
pub fn hold_last_impute(
    sparse: &[Detection],
    stride: usize,
    total_frames: usize,
    gamma: f64,
) -> Result<Vec<Detection>> {
    if stride < 1 {
        return Err(invalid("stride must be at least 1"));
    }
    if !(gamma >= 0.0) {
        return Err(invalid(format!("decay {gamma} must be non-negative")));
    }
    let mut by_frame: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for d in sparse {
        if d.frame % stride != 0 {
            return Err(invalid(format!(
                "detection on frame {} is not on the stride-{stride} grid",
                d.frame
            )));
        }
        if d.frame >= total_frames {
            return Err(invalid(format!(
                "detection on frame {} beyond {total_frames} frames",
                d.frame
            )));
        }
        by_frame.entry(d.frame).or_default().push(*d);
    }

    let mut imputer = HoldLast::new(gamma);
    let mut dense = Vec::with_capacity(sparse.len() * stride);
    for frame in 0..total_frames {
        if frame % stride == 0 {
            let dets = by_frame.remove(&frame).unwrap_or_default();
            dense.extend(imputer.observe(frame, dets));
        } else {
            dense.extend(imputer.fill(frame));
        }
    }
    Ok(dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal_metrics::BBox;

    fn det(frame: usize, confidence: f64) -> Detection {
        Detection {
            frame,
            bbox: BBox::new(10.0, 10.0, 4.0, 4.0),
            class_id: 0,
            confidence,
        }
    }

    #[test]
    fn stride_one_is_identity() {
        let input = vec![det(0, 0.9), det(1, 0.5), det(3, 0.7)];
        assert_eq!(hold_last_impute(&input, 1, 5, 0.3).unwrap(), input);
    }

    #[test]
    fn stride_three_decays() {
        let out = hold_last_impute(&[det(0, 0.9)], 3, 3, 0.2).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].confidence, 0.9);
        assert!((out[1].confidence - 0.736_857_677_8).abs() < 1e-9);
        assert!((out[2].confidence - 0.603_288_041_4).abs() < 1e-9);
        assert_eq!((out[1].frame, out[2].frame), (1, 2));
    }

    #[test]
    fn zero_decay_holds_confidence() {
        let out = hold_last_impute(&[det(0, 0.8), det(4, 0.6)], 2, 6, 0.0).unwrap();
        let confs: Vec<f64> = out.iter().map(|d| d.confidence).collect();
        assert_eq!(confs, vec![0.8, 0.8, 0.6, 0.6]);
        let frames: Vec<usize> = out.iter().map(|d| d.frame).collect();
        assert_eq!(frames, vec![0, 1, 4, 5]);
    }

    #[test]
    fn empty_processed_frame_clears_hold() {
        let out = hold_last_impute(&[det(0, 0.8)], 2, 4, 0.0).unwrap();
        assert_eq!(out.iter().map(|d| d.frame).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hold_last_impute(&[], 0, 4, 0.1).is_err());
        assert!(hold_last_impute(&[det(1, 0.5)], 2, 4, 0.1).is_err());
        assert!(hold_last_impute(&[det(8, 0.5)], 2, 4, 0.1).is_err());
        assert!(hold_last_impute(&[], 2, 4, -1.0).is_err());
    }
}
