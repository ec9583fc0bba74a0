use proptest::prelude::*;

use ace_sched::detector::{processed_pixels, FrameView};
use ace_sched::roi_tracker::{make_roi, FrameLog, RoiTracker, TrackerParams};
use ace_sched::sim_harness::{generate_timeline, ScriptParams, SyntheticDetector, TierCalibration};
use ace_sched::temporal_metrics::{BBox, GestureTimeline};

const EPS: f64 = 1e-9;

fn script(seed: u64, speed: f64, duty: f64) -> GestureTimeline {
    generate_timeline(
        seed,
        &ScriptParams {
            total_frames: 600,
            duty_cycle: duty,
            max_speed: speed,
            ..Default::default()
        },
    )
    .unwrap()
}

fn tier(noise: f64, fp: f64) -> TierCalibration {
    TierCalibration {
        localization_noise_px: noise,
        detect_prob: 0.9,
        false_positive_rate: fp,
        ..TierCalibration::perfect("t", 10.0, 4.0)
    }
}

fn track(timeline: &GestureTimeline, calib: &TierCalibration, seed: u64, resolution: u32) -> Vec<FrameLog> {
    let mut tracker = RoiTracker::new(TrackerParams::default()).unwrap();
    let mut det = SyntheticDetector::new(calib.clone(), seed).unwrap();
    (0..timeline.total_frames())
        .map(|index| tracker.step(&FrameView { timeline, index }, &mut det, resolution).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tracked_runs_stay_in_frame_and_never_cost_more(
        seed in 0u64..1000,
        speed in 0.5f64..8.0,
        duty in 0.05f64..0.4,
        noise in 0.0f64..12.0,
        fp in 0.0f64..0.05,
        resolution in prop::sample::select(vec![160u32, 320, 640]),
    ) {
        let t = script(seed, speed, duty);
        let calib = tier(noise, fp);
        let logs = track(&t, &calib, seed, resolution);
        let full = processed_pixels(&FrameView { timeline: &t, index: 0 }.full_region(), t.width, t.height, resolution);

        for log in &logs {
            if let Some(b) = log.bbox {
                prop_assert!(b.x0() >= -EPS && b.y0() >= -EPS, "{b:?}");
                prop_assert!(b.x1() <= t.width + EPS && b.y1() <= t.height + EPS, "{b:?}");
                prop_assert!(b.w > 0.0 && b.h > 0.0);
            }
            if let Some(roi) = log.roi {
                let r = roi.region;
                prop_assert!(r.x0 >= 0.0 && r.y0 >= 0.0);
                prop_assert!(r.x0 + r.width <= t.width + EPS && r.y0 + r.height <= t.height + EPS);
            }
            prop_assert!(log.processed_pixels <= full + EPS);
            prop_assert_eq!(log.track_active, log.roi.is_some());
        }

        prop_assert_eq!(&track(&t, &calib, seed, resolution), &logs);

        let roi_total: f64 = logs.iter().map(|l| l.processed_pixels).sum();
        prop_assert!(roi_total <= full * logs.len() as f64 + EPS);
    }

    #[test]
    fn roi_covers_the_box_when_it_fits(
        cx in 0.0f64..640.0,
        cy in 0.0f64..480.0,
        w in 4.0f64..200.0,
        h in 4.0f64..200.0,
        scale in 1.0f64..3.0,
    ) {
        let b = BBox::new(cx, cy, w, h);
        let roi = make_roi(&b, scale, 640.0, 480.0).unwrap();
        let r = roi.region;
        prop_assert!(r.x0 >= 0.0 && r.y0 >= 0.0);
        prop_assert!(r.x0 + r.width <= 640.0 + EPS && r.y0 + r.height <= 480.0 + EPS);
        prop_assert!((roi.side - scale * w.max(h)).abs() < EPS);
        if roi.side <= 480.0 {
            prop_assert!((r.width - roi.side).abs() < EPS && (r.height - roi.side).abs() < EPS);
        }
        // a box inside the frame that fits in the crop is fully covered by it
        if b.x0() >= 0.0 && b.y0() >= 0.0 && b.x1() <= 640.0 && b.y1() <= 480.0 && roi.side <= 480.0 {
            prop_assert!(b.x0() >= r.x0 - EPS && b.x1() <= r.x0 + r.width + EPS);
            prop_assert!(b.y0() >= r.y0 - EPS && b.y1() <= r.y0 + r.height + EPS);
        }
    }
}

#[test]
fn invalid_params_are_rejected() {
    for params in [
        TrackerParams { roi_scale: 0.9, ..Default::default() },
        TrackerParams { iou_gate: 1.0, ..Default::default() },
        TrackerParams { miss_budget: 0, ..Default::default() },
    ] {
        assert!(RoiTracker::new(params).is_err());
    }
    assert!(make_roi(&BBox::new(10.0, 10.0, 0.0, 5.0), 1.8, 640.0, 480.0).is_err());
}
