use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::temporal_metrics::{BBox, GestureEvent, GestureTimeline, GtBox};

/// Parameters for a sparse gesture script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptParams {
    pub total_frames: usize,
    /// Target fraction of gesture-active frames, in (0, 1).
    pub duty_cycle: f64,
    /// Mean burst length in frames.
    pub mean_burst: f64,
    pub num_classes: u32,
    pub width: f64,
    pub height: f64,
    pub fps: f64,
    /// Hand box side range in pixels.
    pub min_size: f64,
    pub max_size: f64,
    /// Largest speed component in pixels per frame.
    pub max_speed: f64,
    /// Frames between velocity changes within a burst.
    pub segment_frames: usize,
}

impl Default for ScriptParams {
    fn default() -> Self {
        Self {
            total_frames: 10_000,
            duty_cycle: 0.03,
            mean_burst: 10.0,
            num_classes: 2,
            width: 640.0,
            height: 480.0,
            fps: 30.0,
            min_size: 60.0,
            max_size: 120.0,
            max_speed: 3.0,
            segment_frames: 5,
        }
    }
}

impl ScriptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(invalid(format!("duty cycle {} outside (0, 1)", self.duty_cycle)));
        }
        if self.total_frames == 0 {
            return Err(invalid("script needs at least one frame"));
        }
        if !(self.mean_burst >= 1.0) {
            return Err(invalid(format!("mean burst {} must be at least 1 frame", self.mean_burst)));
        }
        if self.num_classes == 0 {
            return Err(invalid("at least one gesture class"));
        }
        if !(self.min_size > 0.0 && self.min_size <= self.max_size) {
            return Err(invalid("box size range must be positive and ordered"));
        }
        if self.max_size > self.width.min(self.height) {
            return Err(invalid("boxes larger than the frame"));
        }
        if !(self.max_speed >= 0.0) || self.segment_frames == 0 || !(self.fps > 0.0) {
            return Err(invalid("speed, segment length and fps must be positive"));
        }
        Ok(())
    }
}

/// Seeded sparse gesture timeline.
///
/// Burst lengths are geometric around `mean_burst`; bursts are separated by
/// at least one idle frame and spread over the script by a random split of
/// the idle frames. Inside a burst the hand box moves at piecewise constant
/// velocity and reflects off the frame edges.
pub fn generate_timeline(seed: u64, params: &ScriptParams) -> Result<GestureTimeline> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = ((params.duty_cycle * params.total_frames as f64).round() as usize).max(1);

    let geo = Geometric::new(1.0 / params.mean_burst).map_err(|e| invalid(e.to_string()))?;
    let mut bursts = Vec::new();
    let mut active = 0usize;
    while active < target {
        let len = (geo.sample(&mut rng) as usize + 1).min(target - active);
        bursts.push(len);
        active += len;
    }
    let n = bursts.len();
    if active + (n - 1) >= params.total_frames {
        return Err(invalid(format!(
            "duty cycle {} with mean burst {} does not fit in {} frames",
            params.duty_cycle, params.mean_burst, params.total_frames
        )));
    }

    // split the idle frames into n + 1 gaps, inner gaps at least one frame
    let free = params.total_frames - active - (n - 1);
    let weights: Vec<f64> = (0..=n).map(|_| rng.random::<f64>() + 1e-9).collect();
    let sum: f64 = weights.iter().sum();
    let mut gaps: Vec<usize> = weights
        .iter()
        .map(|w| (free as f64 * w / sum).floor() as usize)
        .collect();
    let assigned: usize = gaps.iter().sum();
    gaps[n] += free - assigned;
    for g in gaps.iter_mut().take(n).skip(1) {
        *g += 1;
    }

    let id = format!("synthetic-{seed:016x}");
    let mut t = GestureTimeline::new(id, params.width, params.height, params.fps, params.total_frames);
    let mut cursor = 0usize;
    for (i, &len) in bursts.iter().enumerate() {
        cursor += gaps[i];
        let class_id = rng.random_range(0..params.num_classes);
        let start = cursor;
        let end = start + len - 1;
        for (frame, bbox) in (start..=end).zip(trajectory(&mut rng, params, len)) {
            t.push_box(frame, GtBox { bbox, class_id });
        }
        t.events.push(GestureEvent::new(class_id, start, end));
        cursor = end + 1;
    }
    Ok(t)
}

fn trajectory(rng: &mut ChaCha8Rng, p: &ScriptParams, len: usize) -> Vec<BBox> {
    let side = rng.random_range(p.min_size..=p.max_size);
    let aspect = rng.random_range(0.8..=1.2);
    let (w, h) = ((side * aspect).min(p.width), (side / aspect).min(p.height));
    let (lo_x, hi_x) = (w / 2.0, p.width - w / 2.0);
    let (lo_y, hi_y) = (h / 2.0, p.height - h / 2.0);
    let mut cx = rng.random_range(lo_x..=hi_x);
    let mut cy = rng.random_range(lo_y..=hi_y);
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut out = Vec::with_capacity(len);
    for f in 0..len {
        if f % p.segment_frames == 0 && p.max_speed > 0.0 {
            vx = rng.random_range(-p.max_speed..=p.max_speed);
            vy = rng.random_range(-p.max_speed..=p.max_speed);
        }
        out.push(BBox::new(cx, cy, w, h));
        cx += vx;
        cy += vy;
        if cx < lo_x || cx > hi_x {
            vx = -vx;
            cx = cx.clamp(lo_x, hi_x);
        }
        if cy < lo_y || cy > hi_y {
            vy = -vy;
            cy = cy.clamp(lo_y, hi_y);
        }
    }
    out
}
