use std::collections::BTreeSet;
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};

use serde::{Deserialize, Serialize};

use super::{
    adaptive_weights, compute_pressures, compute_slacks, energy_budget, feasible_set, latency_budget, rank,
    smooth_and_hold, AceWeights, Constraints, HoldState, HysteresisParams, PressureCaps, Pressures,
    RankedProfile, Slacks, TelemetrySample,
};
use crate::ace_profiler::{normalize_table, AceProfile, ConfigPoint};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub caps: PressureCaps,
    pub hysteresis: HysteresisParams,
    pub top_k: usize,
    /// Multiplier on the accuracy weight while a gesture is in progress.
    #[serde(default)]
    pub gesture_boost: Option<f64>,
    /// Fixed weights that bypass slack and pressure adaptation.
    #[serde(default)]
    pub forced_weights: Option<AceWeights>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            caps: PressureCaps::default(),
            hysteresis: HysteresisParams::default(),
            top_k: 5,
            gesture_boost: None,
            forced_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorState {
    pub hold: HoldState,
    pub last_sample: Option<TelemetrySample>,
    /// Smoothed ratio of measured to profiled latency.
    pub latency_factor: f64,
}

impl Default for SelectorState {
    fn default() -> Self {
        Self {
            hold: HoldState::default(),
            last_sample: None,
            latency_factor: 1.0,
        }
    }
}

impl SelectorState {
    /// Folds one measured/profiled latency ratio into the running factor.
    pub fn observe_latency(&mut self, measured: f64, profiled: f64) {
        if measured > 0.0 && profiled > 0.0 && measured.is_finite() {
            self.latency_factor = 0.5 * (measured / profiled) + 0.5 * self.latency_factor;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t: f64,
    pub chosen: ConfigPoint,
    pub score: f64,
    pub weights: AceWeights,
    pub slacks: Slacks,
    pub pressures: Pressures,
    pub feasible_count: usize,
    pub fallback: bool,
    pub switched: bool,
    pub top_k: Vec<RankedProfile>,
}

/// One selector iteration: budgets, feasibility, slacks, pressures, weights,
/// ranking and hysteresis.
///
/// A missing telemetry sample reuses the previous one; with no sample at all
/// pressures are zero and the battery level comes from the constraints.
pub fn control_step(
    t: f64,
    profiles: &[AceProfile],
    constraints: &Constraints,
    sample: Option<&TelemetrySample>,
    gesture_active: bool,
    cfg: &SelectorConfig,
    state: &mut SelectorState,
) -> Result<Decision> {
    if profiles.is_empty() {
        return Err(Error::Empty("profile table"));
    }
    constraints.validate()?;
    if let Some(s) = sample {
        state.last_sample = Some(*s);
    }
    let mut c = constraints.clone();
    if let Some(s) = &state.last_sample {
        c.state_of_charge = (s.battery_pct / 100.0).clamp(0.0, 1.0);
    }

    let factor = state.latency_factor.max(f64::MIN_POSITIVE);
    let l_bud = latency_budget(c.fps_target)? / factor;
    let e_bud = energy_budget(&c)?;

    let feasible = feasible_set(profiles, l_bud, e_bud, c.a_min);
    let slacks = compute_slacks(feasible.profiles.iter().copied(), l_bud, e_bud, c.a_min)?;
    let pressures = state
        .last_sample
        .as_ref()
        .map(|s| compute_pressures(s, &cfg.caps))
        .unwrap_or_default();

    let mut weights = match cfg.forced_weights {
        Some(w) => w,
        None => adaptive_weights(&slacks, &pressures),
    };
    if gesture_active {
        if let Some(boost) = cfg.gesture_boost {
            if !(boost > 0.0) {
                return Err(invalid(format!("gesture boost {boost} must be positive")));
            }
            weights = AceWeights::from_raw(weights.delta_a * boost, weights.gamma_c, weights.eta_e)?;
        }
    }

    let normalized = normalize_table(profiles, &weights)?;
    let keep: BTreeSet<&ConfigPoint> = feasible.profiles.iter().map(|p| &p.point).collect();
    let candidates: Vec<AceProfile> = normalized
        .into_iter()
        .filter(|p| keep.contains(&p.point))
        .collect();
    let ranking = rank(&candidates, &weights);
    let outcome = smooth_and_hold(&mut state.hold, &ranking, &cfg.hysteresis)
        .ok_or(Error::Empty("ranking"))?;

    // chosen first, then the rest of the ranking in order
    let chosen = ranking[outcome.chosen].clone();
    let mut top_k = vec![chosen.clone()];
    top_k.extend(
        ranking
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != outcome.chosen)
            .map(|(_, r)| r.clone())
            .take(cfg.top_k.saturating_sub(1)),
    );

    Ok(Decision {
        t,
        chosen: chosen.point,
        score: chosen.score,
        weights,
        slacks,
        pressures,
        feasible_count: if feasible.fallback { 0 } else { feasible.profiles.len() },
        fallback: feasible.fallback,
        switched: outcome.switched,
        top_k,
    })
}

/// Owns a profile table and selector state across control steps.
#[derive(Debug, Clone)]
pub struct Controller {
    profiles: Vec<AceProfile>,
    constraints: Constraints,
    config: SelectorConfig,
    state: SelectorState,
}

impl Controller {
    pub fn new(profiles: Vec<AceProfile>, constraints: Constraints, config: SelectorConfig) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Empty("profile table"));
        }
        constraints.validate()?;
        Ok(Self {
            profiles,
            constraints,
            config,
            state: SelectorState::default(),
        })
    }

    pub fn profiles(&self) -> &[AceProfile] {
        &self.profiles
    }

    pub fn profile(&self, point: &ConfigPoint) -> Option<&AceProfile> {
        self.profiles.iter().find(|p| &p.point == point)
    }

    pub fn constraints_mut(&mut self) -> &mut Constraints {
        &mut self.constraints
    }

    pub fn state(&self) -> &SelectorState {
        &self.state
    }

    pub fn step(&mut self, t: f64, sample: Option<&TelemetrySample>, gesture_active: bool) -> Result<Decision> {
        control_step(
            t,
            &self.profiles,
            &self.constraints,
            sample,
            gesture_active,
            &self.config,
            &mut self.state,
        )
    }

    /// Records a measured per-call latency for `point` against its profile.
    pub fn observe_latency(&mut self, point: &ConfigPoint, measured_s: f64) {
        if let Some(p) = self.profiles.iter().find(|p| &p.point == point) {
            let profiled = p.raw.l_mean;
            self.state.observe_latency(measured_s, profiled);
        }
    }
}

/// Single-producer telemetry queue where the newest sample wins.
#[derive(Debug)]
pub struct TelemetryFeed {
    rx: Receiver<TelemetrySample>,
    last: Option<TelemetrySample>,
}

impl TelemetryFeed {
    pub fn channel() -> (Sender<TelemetrySample>, Self) {
        let (tx, rx) = mpsc::channel();
        (tx, Self { rx, last: None })
    }

    /// Drains pending samples without blocking and returns the newest one
    /// seen so far.
    pub fn latest(&mut self) -> Option<TelemetrySample> {
        loop {
            match self.rx.try_recv() {
                Ok(s) => {
                    if self.last.map_or(true, |l| s.timestamp >= l.timestamp) {
                        self.last = Some(s);
                    }
                }
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
            }
        }
        self.last
    }
}
