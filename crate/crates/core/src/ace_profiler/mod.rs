//! Accuracy/complexity/energy profiling over a (model, resolution, stride) grid.
//!
//! Each grid point is run over a set of annotated videos with hold-last
//! imputation between strided calls. Accuracy is the blended event/frame F1,
//! complexity comes from stride-aware latency and FLOPs, and energy is the
//! idle-subtracted power integral per source frame. Axes are min-max
//! normalized across the whole table.

mod energy;
mod runner;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::runtime_selector::{complexity_mix, AceWeights};

pub use energy::{integrate_energy, EnergyEstimate, PowerSource, PowerTrace};
pub use runner::{run_one_video, CallRecord, FrameResult, RunnerConfig, StreamRunner, VideoRun};
pub use table::{build_table, GridSpec, ModelSpec, ProfileConfig};

/// Grid resolutions used when none are given.
pub const DEFAULT_RESOLUTIONS: [u32; 3] = [160, 320, 640];
/// Grid strides used when none are given.
pub const DEFAULT_STRIDES: [u32; 4] = [1, 2, 3, 6];

/// One operating point `(model, resolution, stride)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigPoint {
    pub model: String,
    pub resolution: u32,
    pub stride: u32,
}

impl ConfigPoint {
    pub fn new(model: impl Into<String>, resolution: u32, stride: u32) -> Self {
        Self {
            model: model.into(),
            resolution,
            stride,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(invalid(format!("{self}: resolution must be positive")));
        }
        if self.stride == 0 {
            return Err(invalid(format!("{self}: stride must be at least 1")));
        }
        Ok(())
    }
}

impl fmt::Display for ConfigPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}/k{}", self.model, self.resolution, self.stride)
    }
}

/// Raw measurements for one grid point, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProfile {
    pub a_fr: f64,
    pub a_ev: f64,
    pub a_blend: f64,
    /// Seconds per inference call.
    pub l_mean: f64,
    pub l_p90: f64,
    /// Seconds per source frame.
    pub l_eff: f64,
    /// Nominal GFLOPs at 640 px.
    pub g640: Option<f64>,
    /// GFLOPs per source frame.
    pub c_flop: Option<f64>,
    /// Joules per source frame.
    pub e_per_frame: f64,
    /// Mean power above idle while busy, watts.
    pub mean_excess_power: f64,
}

impl RawProfile {
    /// A stride-1 profile with one accuracy value on all three accuracy fields.
    pub fn from_axes(accuracy: f64, l_eff: f64, c_flop: Option<f64>, e_per_frame: f64) -> Self {
        Self {
            a_fr: accuracy,
            a_ev: accuracy,
            a_blend: accuracy,
            l_mean: l_eff,
            l_p90: l_eff,
            l_eff,
            g640: None,
            c_flop,
            e_per_frame,
            mean_excess_power: 0.0,
        }
    }
}

/// A grid point with raw and normalized axes and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ProfileRecord", try_from = "ProfileRecord")]
pub struct AceProfile {
    pub point: ConfigPoint,
    pub raw: RawProfile,
    pub a_norm: f64,
    pub c_norm: f64,
    pub e_norm: f64,
    pub score: f64,
}

impl AceProfile {
    /// Wraps raw measurements; normalized fields stay at zero until
    /// [`normalize_table`] runs.
    pub fn from_raw(point: ConfigPoint, raw: RawProfile) -> Self {
        Self {
            point,
            raw,
            a_norm: 0.0,
            c_norm: 0.0,
            e_norm: 0.0,
            score: 0.0,
        }
    }
}

/// On-disk layout: flat, with milliseconds and millijoules.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProfileRecord {
    model: String,
    resolution: u32,
    stride: u32,
    #[serde(default)]
    a_fr: Option<f64>,
    #[serde(default)]
    a_ev: Option<f64>,
    a_blend: f64,
    #[serde(default)]
    l_mean_ms: Option<f64>,
    #[serde(default)]
    l_p90_ms: Option<f64>,
    l_eff_ms: f64,
    #[serde(default)]
    g640: Option<f64>,
    #[serde(default)]
    c_flop: Option<f64>,
    e_mj_per_frame: f64,
    #[serde(default)]
    mean_excess_w: f64,
    #[serde(default)]
    a_norm: f64,
    #[serde(default)]
    c_norm: f64,
    #[serde(default)]
    e_norm: f64,
    #[serde(default)]
    score: f64,
}

impl From<AceProfile> for ProfileRecord {
    fn from(p: AceProfile) -> Self {
        let r = p.raw;
        Self {
            model: p.point.model,
            resolution: p.point.resolution,
            stride: p.point.stride,
            a_fr: Some(r.a_fr),
            a_ev: Some(r.a_ev),
            a_blend: r.a_blend,
            l_mean_ms: Some(r.l_mean * 1e3),
            l_p90_ms: Some(r.l_p90 * 1e3),
            l_eff_ms: r.l_eff * 1e3,
            g640: r.g640,
            c_flop: r.c_flop,
            e_mj_per_frame: r.e_per_frame * 1e3,
            mean_excess_w: r.mean_excess_power,
            a_norm: p.a_norm,
            c_norm: p.c_norm,
            e_norm: p.e_norm,
            score: p.score,
        }
    }
}

impl TryFrom<ProfileRecord> for AceProfile {
    type Error = Error;

    fn try_from(r: ProfileRecord) -> Result<Self> {
        let point = ConfigPoint::new(r.model, r.resolution, r.stride);
        point.validate()?;
        if !(r.l_eff_ms >= 0.0) || !(r.e_mj_per_frame >= 0.0) {
            return Err(Error::Schema(format!("{point}: latency and energy must be non-negative")));
        }
        let l_eff = r.l_eff_ms * 1e-3;
        let l_mean = r.l_mean_ms.map_or(l_eff * r.stride as f64, |v| v * 1e-3);
        let c_flop = r
            .c_flop
            .or_else(|| r.g640.map(|g| effective_flops(g, r.resolution, r.stride)));
        Ok(Self {
            point,
            raw: RawProfile {
                a_fr: r.a_fr.unwrap_or(r.a_blend),
                a_ev: r.a_ev.unwrap_or(r.a_blend),
                a_blend: r.a_blend,
                l_mean,
                l_p90: r.l_p90_ms.map_or(l_mean, |v| v * 1e-3),
                l_eff,
                g640: r.g640,
                c_flop,
                e_per_frame: r.e_mj_per_frame * 1e-3,
                mean_excess_power: r.mean_excess_w,
            },
            a_norm: r.a_norm,
            c_norm: r.c_norm,
            e_norm: r.e_norm,
            score: r.score,
        })
    }
}

/// Seconds per source frame when only every `stride`-th frame is processed.
pub fn effective_latency(l_mean: f64, stride: u32) -> Result<f64> {
    if stride < 1 {
        return Err(invalid("stride must be at least 1"));
    }
    Ok(l_mean / stride as f64)
}

/// GFLOPs per source frame: `g640·(r/640)²/k`.
pub fn effective_flops(g640: f64, resolution: u32, stride: u32) -> f64 {
    let scale = resolution as f64 / 640.0;
    g640 * scale * scale / stride as f64
}

/// `(v − min)/(max − min)`; an all-equal input maps to zeros.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("values to normalize"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect())
}

pub fn ace_score(a_norm: f64, c_norm: f64, e_norm: f64, w: &AceWeights) -> f64 {
    w.delta_a * a_norm - w.gamma_c * c_norm - w.eta_e * e_norm
}

/// Recomputes normalized axes and scores across the whole table.
///
/// Complexity mixes normalized latency with normalized FLOPs when every
/// profile carries a FLOPs figure, and is latency alone otherwise.
pub fn normalize_table(profiles: &[AceProfile], weights: &AceWeights) -> Result<Vec<AceProfile>> {
    if profiles.is_empty() {
        return Err(Error::Empty("profile table"));
    }
    let acc: Vec<f64> = profiles.iter().map(|p| p.raw.a_blend).collect();
    let lat: Vec<f64> = profiles.iter().map(|p| p.raw.l_eff).collect();
    let energy: Vec<f64> = profiles.iter().map(|p| p.raw.e_per_frame).collect();
    let flops: Option<Vec<f64>> = profiles.iter().map(|p| p.raw.c_flop).collect();

    let a_norm = minmax_normalize(&acc)?;
    let e_norm = minmax_normalize(&energy)?;
    let mix = complexity_mix(&lat, flops.as_deref())?;

    Ok(profiles
        .iter()
        .enumerate()
        .map(|(i, p)| AceProfile {
            point: p.point.clone(),
            raw: p.raw.clone(),
            a_norm: a_norm[i],
            c_norm: mix.c_norm[i],
            e_norm: e_norm[i],
            score: ace_score(a_norm[i], mix.c_norm[i], e_norm[i], weights),
        })
        .collect())
}

/// Nearest-rank percentile (`q` in (0, 1]) of unsorted samples.
pub fn nearest_rank(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}
