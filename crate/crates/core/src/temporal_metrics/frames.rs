use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{iou, Counts, Detection, GroundTruthFrame, GtBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

/// Canonical ordering for greedy matching: confidence descending, then box
/// geometry and class, so permuting predictions never changes the outcome.
fn match_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.bbox.cx.total_cmp(&b.bbox.cx))
        .then(a.bbox.cy.total_cmp(&b.bbox.cy))
        .then(a.bbox.w.total_cmp(&b.bbox.w))
        .then(a.bbox.h.total_cmp(&b.bbox.h))
}

/// Greedy one-to-one matching on a single frame.
pub(crate) fn match_frame(preds: &[&Detection], gt: &[GtBox], iou_thresh: f64) -> Counts {
    let mut order: Vec<&Detection> = preds.to_vec();
    order.sort_by(|a, b| match_order(a, b));
    let mut taken = vec![false; gt.len()];
    let mut tp = 0;
    for pred in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt.iter().enumerate() {
            if taken[j] || g.class_id != pred.class_id {
                continue;
            }
            let overlap = iou(&pred.bbox, &g.bbox);
            if overlap >= iou_thresh && best.is_none_or(|(_, o)| overlap > o) {
                best = Some((j, overlap));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
            tp += 1;
        }
    }
    Counts {
        tp,
        fp: preds.len() - tp,
        fn_: gt.len() - tp,
    }
}

/// Frame-level precision, recall and F1.
///
/// Only predictions with confidence at or above `conf_thresh` take part. A
/// prediction is a true positive when it is matched to a same-class ground
/// truth box on its frame with IoU ≥ `iou_thresh`.
pub fn frame_metrics(
    preds: &[Detection],
    gt: &[GroundTruthFrame],
    iou_thresh: f64,
    conf_thresh: f64,
) -> FrameScores {
    let mut by_frame: BTreeMap<usize, (Vec<&Detection>, Vec<GtBox>)> = BTreeMap::new();
    for p in preds.iter().filter(|p| p.confidence >= conf_thresh) {
        by_frame.entry(p.frame).or_default().0.push(p);
    }
    for g in gt {
        by_frame
            .entry(g.frame)
            .or_default()
            .1
            .extend(g.entries.iter().copied());
    }

    let mut counts = Counts::default();
    for (frame_preds, frame_gt) in by_frame.values() {
        counts += match_frame(frame_preds, frame_gt, iou_thresh);
    }
    FrameScores {
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        counts,
    }
}
