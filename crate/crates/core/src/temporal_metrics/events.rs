use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Counts, Detection, GestureEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventScores {
    pub f1: f64,
    pub counts: Counts,
}

/// Event-level F1.
///
/// An event is a true positive when at least one same-class prediction with
/// confidence ≥ `conf_thresh` lies inside its span. Each maximal run of
/// positive frames of a class that touches no event of that class counts as
/// one false-positive event.
pub fn event_f1(preds: &[Detection], events: &[GestureEvent], conf_thresh: f64) -> EventScores {
    let mut positives: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for p in preds.iter().filter(|p| p.confidence >= conf_thresh) {
        positives.entry(p.class_id).or_default().insert(p.frame);
    }

    let mut counts = Counts::default();
    for ev in events {
        let hit = positives
            .get(&ev.class_id)
            .is_some_and(|frames| frames.range(ev.start..=ev.end).next().is_some());
        if hit {
            counts.tp += 1;
        } else {
            counts.fn_ += 1;
        }
    }

    for (class_id, frames) in &positives {
        let class_events: Vec<&GestureEvent> =
            events.iter().filter(|e| e.class_id == *class_id).collect();
        for (start, end) in runs(frames) {
            let touches = class_events.iter().any(|e| e.start <= end && start <= e.end);
            if !touches {
                counts.fp += 1;
            }
        }
    }

    EventScores {
        f1: counts.f1(),
        counts,
    }
}

/// Maximal runs of consecutive frames, inclusive.
fn runs(frames: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut iter = frames.iter().copied();
    let Some(first) = iter.next() else { return out };
    let (mut start, mut end) = (first, first);
    for f in iter {
        if f == end + 1 {
            end = f;
        } else {
            out.push((start, end));
            start = f;
            end = f;
        }
    }
    out.push((start, end));
    out
}
