//! Constraint- and telemetry-driven operating point selection.
//!
//! Application constraints become a latency budget, a per-frame energy budget
//! and an accuracy floor. The best profile's headroom against each is a
//! *slack* in `[0, 1]`; live telemetry becomes thermal, utilization and
//! battery *pressures*. Slacks and pressures set the accuracy, complexity
//! and energy weights used to score the profile table, and a hysteresis
//! stage keeps the chosen tier from flapping.

mod controller;
mod hysteresis;
mod rank;
mod spearman;

use serde::{Deserialize, Serialize};

use crate::ace_profiler::AceProfile;
use crate::error::{invalid, Result};

pub use controller::{control_step, Controller, Decision, SelectorConfig, SelectorState, TelemetryFeed};
pub use hysteresis::{smooth_and_hold, HoldOutcome, HoldState, HysteresisParams};
pub use rank::{rank, RankedProfile};
pub use spearman::{average_ranks, complexity_mix, spearman, ComplexityMix};

/// Application-level constraints and battery model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    /// Minimum blended accuracy.
    pub a_min: f64,
    pub fps_target: f64,
    pub battery_capacity_wh: f64,
    /// Used when no telemetry sample supplies a battery reading.
    pub state_of_charge: f64,
    pub horizon_s: f64,
    pub background_power_w: f64,
    /// Explicit per-frame energy budget in joules; bypasses the battery model.
    #[serde(default)]
    pub e_bud_override_j: Option<f64>,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            a_min: 0.0,
            fps_target: 30.0,
            battery_capacity_wh: 50.0,
            state_of_charge: 1.0,
            horizon_s: 3600.0,
            background_power_w: 0.0,
            e_bud_override_j: None,
        }
    }
}

impl Constraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps_target > 0.0) {
            return Err(invalid(format!("fps target {} must be positive", self.fps_target)));
        }
        if !(self.horizon_s > 0.0) {
            return Err(invalid(format!("horizon {} must be positive", self.horizon_s)));
        }
        if !(0.0..=1.0).contains(&self.state_of_charge) {
            return Err(invalid(format!(
                "state of charge {} outside [0, 1]",
                self.state_of_charge
            )));
        }
        Ok(())
    }
}

/// One telemetry reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub timestamp: f64,
    pub battery_pct: f64,
    #[serde(rename = "cpu_temp")]
    pub cpu_temp_c: f64,
    #[serde(rename = "gpu_temp")]
    pub gpu_temp_c: f64,
    #[serde(rename = "gpu_util")]
    pub gpu_util_pct: f64,
    pub power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub s_lat: f64,
    pub s_energy: f64,
    pub s_acc: f64,
}

impl Slacks {
    pub fn full() -> Self {
        Self {
            s_lat: 1.0,
            s_energy: 1.0,
            s_acc: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pressures {
    pub thermal: f64,
    pub util: f64,
    pub battery: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureCaps {
    /// Safe temperature cap, °C.
    pub t_cap: f64,
    /// GPU utilization threshold, percent.
    pub util_thresh: f64,
}

impl Default for PressureCaps {
    fn default() -> Self {
        Self {
            t_cap: 85.0,
            util_thresh: 90.0,
        }
    }
}

/// Accuracy, complexity and energy weights; always sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AceWeights {
    #[serde(rename = "dA")]
    pub delta_a: f64,
    #[serde(rename = "gC")]
    pub gamma_c: f64,
    #[serde(rename = "eE")]
    pub eta_e: f64,
}

impl AceWeights {
    /// Normalizes non-negative raw weights to sum to one.
    pub fn from_raw(delta_a: f64, gamma_c: f64, eta_e: f64) -> Result<Self> {
        let sum = delta_a + gamma_c + eta_e;
        if [delta_a, gamma_c, eta_e].iter().any(|w| !(*w >= 0.0)) || !(sum > 0.0) || !sum.is_finite() {
            return Err(invalid(format!(
                "weights ({delta_a}, {gamma_c}, {eta_e}) must be non-negative with a positive sum"
            )));
        }
        Ok(Self {
            delta_a: delta_a / sum,
            gamma_c: gamma_c / sum,
            eta_e: eta_e / sum,
        })
    }

    pub fn neutral() -> Self {
        Self {
            delta_a: 1.0 / 3.0,
            gamma_c: 1.0 / 3.0,
            eta_e: 1.0 / 3.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.delta_a + self.gamma_c + self.eta_e
    }
}

/// Seconds per frame available at the target rate.
pub fn latency_budget(fps_target: f64) -> Result<f64> {
    if !(fps_target > 0.0) {
        return Err(invalid(format!("fps target {fps_target} must be positive")));
    }
    Ok(1.0 / fps_target)
}

/// Joules per frame: the explicit override, or usable battery energy net of
/// background draw spread evenly over the horizon's frames, clamped at zero.
pub fn energy_budget(c: &Constraints) -> Result<f64> {
    if let Some(e) = c.e_bud_override_j {
        return Ok(e);
    }
    if !(c.horizon_s > 0.0) {
        return Err(invalid(format!("horizon {} must be positive", c.horizon_s)));
    }
    let usable = c.battery_capacity_wh * 3600.0 * c.state_of_charge;
    let background = c.background_power_w * c.horizon_s;
    Ok((usable - background).max(0.0) / (c.fps_target * c.horizon_s))
}

/// Profiles meeting all three budgets; the whole table (flagged) when none does.
#[derive(Debug, Clone)]
pub struct Feasible<'a> {
    pub profiles: Vec<&'a AceProfile>,
    pub fallback: bool,
}

pub fn feasible_set(profiles: &[AceProfile], l_bud: f64, e_bud: f64, a_min: f64) -> Feasible<'_> {
    let ok: Vec<&AceProfile> = profiles
        .iter()
        .filter(|p| p.raw.a_blend >= a_min && p.raw.l_eff <= l_bud && p.raw.e_per_frame <= e_bud)
        .collect();
    if ok.is_empty() {
        Feasible {
            profiles: profiles.iter().collect(),
            fallback: true,
        }
    } else {
        Feasible {
            profiles: ok,
            fallback: false,
        }
    }
}

fn headroom(budget: f64, best: f64) -> f64 {
    if budget.is_infinite() && budget > 0.0 {
        return 1.0;
    }
    if !(budget > 0.0) {
        return 0.0;
    }
    ((budget - best) / budget).clamp(0.0, 1.0)
}

/// Latency, energy and accuracy slack of the best profile in `profiles`.
pub fn compute_slacks<'a>(
    profiles: impl IntoIterator<Item = &'a AceProfile>,
    l_bud: f64,
    e_bud: f64,
    a_min: f64,
) -> Result<Slacks> {
    let mut min_l = f64::INFINITY;
    let mut min_e = f64::INFINITY;
    let mut max_a = f64::NEG_INFINITY;
    let mut any = false;
    for p in profiles {
        any = true;
        min_l = min_l.min(p.raw.l_eff);
        min_e = min_e.min(p.raw.e_per_frame);
        max_a = max_a.max(p.raw.a_blend);
    }
    if !any {
        return Err(crate::Error::Empty("profile set"));
    }
    let s_acc = if a_min >= 1.0 {
        if max_a >= a_min { 1.0 } else { 0.0 }
    } else {
        ((max_a - a_min) / (1.0 - a_min)).clamp(0.0, 1.0)
    };
    Ok(Slacks {
        s_lat: headroom(l_bud, min_l),
        s_energy: headroom(e_bud, min_e),
        s_acc,
    })
}

pub fn compute_pressures(sample: &TelemetrySample, caps: &PressureCaps) -> Pressures {
    let hottest = sample.cpu_temp_c.max(sample.gpu_temp_c);
    Pressures {
        thermal: (hottest / caps.t_cap).clamp(0.0, 2.0),
        util: (sample.gpu_util_pct / caps.util_thresh).clamp(0.0, 2.0),
        battery: (1.0 - sample.battery_pct / 100.0).clamp(0.0, 1.0),
    }
}

/// Exponential raw weights from slacks and pressures, normalized to sum to one.
pub fn adaptive_weights(s: &Slacks, p: &Pressures) -> AceWeights {
    let delta = (2.0 * s.s_acc).exp() * (1.0 - p.battery).exp();
    let gamma = (3.0 * (1.0 - s.s_lat)).exp() * (2.5 * p.thermal).exp() * (1.5 * p.util).exp();
    let eta = (2.5 * (1.0 - s.s_energy)).exp() * (3.0 * p.battery).exp();
    AceWeights::from_raw(delta, gamma, eta).expect("exponentials are positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ace_profiler::{AceProfile, ConfigPoint, RawProfile};

    pub(crate) fn profile(model: &str, a: f64, l: f64, e: f64) -> AceProfile {
        AceProfile::from_raw(
            ConfigPoint::new(model, 640, 1),
            RawProfile::from_axes(a, l, None, e),
        )
    }

    #[test]
    fn latency_budget_examples() {
        assert!((latency_budget(30.0).unwrap() - 0.033_333_333).abs() < 1e-9);
        assert_eq!(latency_budget(1.0).unwrap(), 1.0);
        assert!((latency_budget(60.0).unwrap() - 0.016_666_667).abs() < 1e-9);
        assert!(latency_budget(0.0).is_err());
        assert!(latency_budget(-5.0).is_err());
    }

    #[test]
    fn energy_budget_examples() {
        let over = Constraints {
            e_bud_override_j: Some(0.005),
            ..Default::default()
        };
        assert_eq!(energy_budget(&over).unwrap(), 0.005);

        let c = Constraints {
            battery_capacity_wh: 50.0,
            state_of_charge: 0.5,
            horizon_s: 3600.0,
            background_power_w: 20.0,
            fps_target: 30.0,
            ..Default::default()
        };
        assert!((energy_budget(&c).unwrap() - 18_000.0 / 108_000.0).abs() < 1e-12);

        let starved = Constraints {
            background_power_w: 100.0,
            ..c
        };
        assert_eq!(energy_budget(&starved).unwrap(), 0.0);
    }

    #[test]
    fn feasibility_filter() {
        let table = vec![
            profile("a", 0.9, 0.030, 0.010),
            profile("b", 0.7, 0.010, 0.002),
            profile("c", 0.95, 0.050, 0.020),
        ];
        let all = feasible_set(&table, f64::INFINITY, f64::INFINITY, 0.0);
        assert_eq!(all.profiles.len(), 3);
        assert!(!all.fallback);

        let none = feasible_set(&table, f64::INFINITY, f64::INFINITY, 1.01);
        assert_eq!(none.profiles.len(), 3);
        assert!(none.fallback);

        // brute-force against the three budget lines
        let (l_bud, e_bud, a_min) = (0.040, 0.015, 0.8);
        let got: Vec<&str> = feasible_set(&table, l_bud, e_bud, a_min)
            .profiles
            .iter()
            .map(|p| p.point.model.as_str())
            .collect();
        let expected: Vec<&str> = table
            .iter()
            .filter(|p| {
                let ok_a = p.raw.a_blend >= a_min;
                let ok_l = p.raw.l_eff <= l_bud;
                let ok_e = p.raw.e_per_frame <= e_bud;
                ok_a && ok_l && ok_e
            })
            .map(|p| p.point.model.as_str())
            .collect();
        assert_eq!(got, expected);
        assert_eq!(got, vec!["a"]);
    }

    #[test]
    fn slack_examples() {
        let t = vec![profile("a", 1.0, 0.006, 0.001)];
        let s = compute_slacks(&t, 0.0333, 0.002, 0.0).unwrap();
        assert!((s.s_lat - (0.0333 - 0.006) / 0.0333).abs() < 1e-12);
        assert!((s.s_lat - 0.820).abs() < 1e-3);
        assert_eq!(s.s_acc, 1.0);
        assert!((s.s_energy - 0.5).abs() < 1e-12);

        let slow = vec![profile("a", 0.5, 0.040, 0.001)];
        let s = compute_slacks(&slow, 0.0333, 0.0, 0.6).unwrap();
        assert_eq!((s.s_lat, s.s_energy, s.s_acc), (0.0, 0.0, 0.0));

        let inf = compute_slacks(&slow, f64::INFINITY, f64::INFINITY, 0.0).unwrap();
        assert_eq!((inf.s_lat, inf.s_energy), (1.0, 1.0));
        assert!(compute_slacks(&[], 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn pressure_examples() {
        let caps = PressureCaps { t_cap: 85.0, util_thresh: 100.0 };
        let mut s = TelemetrySample {
            timestamp: 0.0,
            battery_pct: 100.0,
            cpu_temp_c: 42.5,
            gpu_temp_c: 30.0,
            gpu_util_pct: 180.0,
            power_w: 10.0,
        };
        let p = compute_pressures(&s, &caps);
        assert!((p.thermal - 0.5).abs() < 1e-12);
        assert_eq!(p.battery, 0.0);
        assert!((p.util - 1.8).abs() < 1e-12);

        s.gpu_util_pct = 500.0;
        s.gpu_temp_c = 400.0;
        s.battery_pct = -10.0;
        let p = compute_pressures(&s, &caps);
        assert_eq!((p.thermal, p.util, p.battery), (2.0, 2.0, 1.0));
    }

    #[test]
    fn weight_examples() {
        let close = |w: AceWeights, e: (f64, f64, f64)| {
            assert!((w.delta_a - e.0).abs() < 1e-3, "{w:?} vs {e:?}");
            assert!((w.gamma_c - e.1).abs() < 1e-3, "{w:?} vs {e:?}");
            assert!((w.eta_e - e.2).abs() < 1e-3, "{w:?} vs {e:?}");
        };
        let neutral = Pressures::default();
        close(adaptive_weights(&Slacks::full(), &neutral), (0.9094, 0.0453, 0.0453));
        let tight = Slacks { s_lat: 0.0, ..Slacks::full() };
        close(adaptive_weights(&tight, &neutral), (0.488, 0.488, 0.024));
        let drained = Pressures { battery: 1.0, ..Default::default() };
        close(adaptive_weights(&Slacks::full(), &drained), (0.260, 0.035, 0.705));
    }

    #[test]
    fn weights_from_raw_rejects_degenerate() {
        assert!(AceWeights::from_raw(0.0, 0.0, 0.0).is_err());
        assert!(AceWeights::from_raw(-1.0, 1.0, 1.0).is_err());
        let w = AceWeights::from_raw(2.0, 1.0, 1.0).unwrap();
        assert_eq!((w.delta_a, w.gamma_c, w.eta_e), (0.5, 0.25, 0.25));
    }
}
