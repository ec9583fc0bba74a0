//! Hardware-free closed-loop environment.
//!
//! Synthetic detector tiers stand in for real networks, seeded scripts supply
//! sparse gesture bursts, and a battery/thermal device model produces the
//! telemetry the selector reacts to.

mod closed_loop;
mod device;
mod oracle;
mod scenario;
mod timeline;

pub use closed_loop::{
    best_accuracy_point, compare_fixed_vs_adaptive, run_closed_loop, write_summary_csv, ClosedLoopConfig,
    ComparisonReport, EpochRecord, Policy, RunLog, RunSummary,
};
pub use device::{step_device, DeviceModel};
pub use oracle::{SyntheticDetector, TierCalibration};
pub use scenario::{LatencySpike, Override, ScenarioConfig, TelemetryOverrides};
pub use timeline::{generate_timeline, ScriptParams};

use crate::ace_profiler::{build_table, AceProfile, GridSpec, ModelSpec, PowerSource, ProfileConfig};
use crate::detector::Detector;
use crate::error::{invalid, Result};
use crate::temporal_metrics::GestureTimeline;

/// Parses a JSON array of tier calibrations.
pub fn load_family(text: &str) -> Result<Vec<TierCalibration>> {
    let tiers: Vec<TierCalibration> = serde_json::from_str(text)?;
    for t in &tiers {
        t.validate()?;
    }
    Ok(tiers)
}

/// The bundled two-tier family: an accurate tier and a cheap one drawing a
/// quarter of its energy.
pub fn two_tier_family() -> Vec<TierCalibration> {
    load_family(include_str!("../../data/two_tier_oracle.json")).expect("bundled calibration is valid")
}

/// Profiles every tier of an oracle family over `grid`.
///
/// Each grid point gets a fresh detector seeded with `seed`, so the table is
/// reproducible.
pub fn profile_family(
    family: &[TierCalibration],
    grid: &GridSpec,
    videos: &[GestureTimeline],
    seed: u64,
    power: &mut PowerSource,
    cfg: &ProfileConfig,
) -> Result<Vec<AceProfile>> {
    let models: Vec<ModelSpec> = family
        .iter()
        .map(|t| ModelSpec {
            id: t.model.clone(),
            g640: t.g640,
            tracker: t.tracker,
        })
        .collect();
    let factory = |model: &ModelSpec, _: &_| -> Result<Box<dyn Detector>> {
        let tier = family
            .iter()
            .find(|t| t.model == model.id)
            .ok_or_else(|| invalid(format!("no oracle tier '{}'", model.id)))?;
        Ok(Box::new(SyntheticDetector::new(tier.clone(), seed)?))
    };
    build_table(&models, grid, videos, factory, power, cfg)
}
