use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::runtime_selector::{Constraints, TelemetrySample};

/// A scripted telemetry value: constant, or linear over the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Override {
    Const(f64),
    Ramp { from: f64, to: f64 },
}

impl Override {
    /// Value at run progress `u` in [0, 1].
    pub fn at(&self, u: f64) -> f64 {
        match *self {
            Self::Const(v) => v,
            Self::Ramp { from, to } => from + (to - from) * u.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TelemetryOverrides {
    #[serde(default)]
    pub battery_pct: Option<Override>,
    #[serde(default)]
    pub cpu_temp_c: Option<Override>,
    #[serde(default)]
    pub gpu_temp_c: Option<Override>,
    #[serde(default)]
    pub gpu_util_pct: Option<Override>,
}

impl TelemetryOverrides {
    pub fn apply(&self, sample: &mut TelemetrySample, u: f64) {
        let set = |slot: &mut f64, o: &Option<Override>| {
            if let Some(o) = o {
                *slot = o.at(u);
            }
        };
        set(&mut sample.battery_pct, &self.battery_pct);
        set(&mut sample.cpu_temp_c, &self.cpu_temp_c);
        set(&mut sample.gpu_temp_c, &self.gpu_temp_c);
        set(&mut sample.gpu_util_pct, &self.gpu_util_pct);
    }
}

/// Multiplies detector latency between two run times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySpike {
    pub start_s: f64,
    pub end_s: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub constraints: Constraints,
    #[serde(default)]
    pub overrides: TelemetryOverrides,
    #[serde(default)]
    pub latency_spikes: Vec<LatencySpike>,
    /// Truncates the script to this many seconds when set.
    #[serde(default)]
    pub duration_s: Option<f64>,
}

const PRESETS: [(&str, &str); 4] = [
    ("balanced", include_str!("../../data/scenarios/balanced.json")),
    ("high-accuracy", include_str!("../../data/scenarios/high-accuracy.json")),
    ("thermal-throttle", include_str!("../../data/scenarios/thermal-throttle.json")),
    ("low-battery", include_str!("../../data/scenarios/low-battery.json")),
];

impl ScenarioConfig {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    /// One of the bundled scenarios.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| invalid(format!("unknown scenario '{name}'")))?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints
            .validate()
            .map_err(|e| Error::Schema(format!("scenario '{}': {e}", self.name)))?;
        if let Some(d) = self.duration_s {
            if !(d > 0.0) {
                return Err(Error::Schema(format!("scenario '{}': duration must be positive", self.name)));
            }
        }
        for s in &self.latency_spikes {
            if !(s.end_s > s.start_s) || !(s.factor > 0.0) {
                return Err(Error::Schema(format!("scenario '{}': malformed latency spike", self.name)));
            }
        }
        Ok(())
    }

    pub fn latency_factor_at(&self, t: f64) -> f64 {
        self.latency_spikes
            .iter()
            .filter(|s| t >= s.start_s && t < s.end_s)
            .map(|s| s.factor)
            .product()
    }
}
