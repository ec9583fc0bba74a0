use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RankedProfile;
use crate::ace_profiler::ConfigPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisParams {
    /// Smoothed-score lead a challenger needs over the incumbent.
    pub margin: f64,
    /// Consecutive evaluations the lead must hold before switching.
    pub window: usize,
    /// EMA weight on the newest score.
    pub smoothing: f64,
}

impl Default for HysteresisParams {
    fn default() -> Self {
        Self {
            margin: 0.02,
            window: 3,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HoldState {
    ema: BTreeMap<ConfigPoint, f64>,
    incumbent: Option<ConfigPoint>,
    streak: Option<(ConfigPoint, usize)>,
}

impl HoldState {
    pub fn incumbent(&self) -> Option<&ConfigPoint> {
        self.incumbent.as_ref()
    }

    pub fn smoothed(&self, point: &ConfigPoint) -> Option<f64> {
        self.ema.get(point).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldOutcome {
    /// Index into the ranking that was handed in.
    pub chosen: usize,
    pub switched: bool,
    pub smoothed_score: f64,
}

/// Keeps the incumbent unless a challenger's smoothed score leads it by at
/// least `margin` for `window` consecutive calls.
///
/// Returns `None` only for an empty ranking. The first call, or a call where
/// the incumbent is no longer ranked, takes the top entry immediately.
pub fn smooth_and_hold(
    state: &mut HoldState,
    ranking: &[RankedProfile],
    params: &HysteresisParams,
) -> Option<HoldOutcome> {
    if ranking.is_empty() {
        return None;
    }
    let a = params.smoothing;
    let mut ema = BTreeMap::new();
    for r in ranking {
        let s = match state.ema.get(&r.point) {
            Some(prev) => a * r.score + (1.0 - a) * prev,
            None => r.score,
        };
        ema.insert(r.point.clone(), s);
    }
    state.ema = ema;

    let position = |p: &ConfigPoint| ranking.iter().position(|r| &r.point == p);
    let incumbent_pos = state.incumbent.as_ref().and_then(|p| position(p));

    let Some(inc) = incumbent_pos else {
        state.incumbent = Some(ranking[0].point.clone());
        state.streak = None;
        return Some(HoldOutcome {
            chosen: 0,
            switched: true,
            smoothed_score: state.ema[&ranking[0].point],
        });
    };

    let inc_score = state.ema[&ranking[inc].point];
    let challenger = ranking
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != inc)
        .max_by(|(i, x), (j, y)| {
            state.ema[&x.point]
                .total_cmp(&state.ema[&y.point])
                .then(j.cmp(i))
        })
        .map(|(i, _)| i);

    if let Some(ch) = challenger {
        let lead = state.ema[&ranking[ch].point] - inc_score;
        if lead >= params.margin {
            let count = match &state.streak {
                Some((p, n)) if *p == ranking[ch].point => n + 1,
                _ => 1,
            };
            if count >= params.window {
                state.incumbent = Some(ranking[ch].point.clone());
                state.streak = None;
                return Some(HoldOutcome {
                    chosen: ch,
                    switched: true,
                    smoothed_score: state.ema[&ranking[ch].point],
                });
            }
            state.streak = Some((ranking[ch].point.clone(), count));
        } else {
            state.streak = None;
        }
    }

    Some(HoldOutcome {
        chosen: inc,
        switched: false,
        smoothed_score: inc_score,
    })
}
