use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sampled power draw with its idle baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    samples: Vec<(f64, f64)>,
    pub idle_watts: f64,
}

impl PowerTrace {
    /// Timestamps must be strictly increasing and watts non-negative.
    pub fn new(samples: Vec<(f64, f64)>, idle_watts: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("power trace"));
        }
        for pair in samples.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(invalid(format!(
                    "power trace timestamps not increasing at t = {}",
                    pair[1].0
                )));
            }
        }
        if let Some((t, w)) = samples.iter().find(|(t, w)| !(*w >= 0.0) || !t.is_finite()) {
            return Err(invalid(format!("invalid power sample ({t}, {w})")));
        }
        if !(idle_watts >= 0.0) {
            return Err(invalid(format!("idle power {idle_watts} must be non-negative")));
        }
        Ok(Self { samples, idle_watts })
    }

    /// Samples `watts(t)` every `cadence` seconds over `[t0, t1]`, endpoints included.
    pub fn sampled(t0: f64, t1: f64, cadence: f64, idle_watts: f64, watts: impl Fn(f64) -> f64) -> Result<Self> {
        if !(cadence > 0.0) || !(t1 > t0) {
            return Err(invalid("sampling needs t1 > t0 and a positive cadence"));
        }
        let n = ((t1 - t0) / cadence).ceil() as usize;
        let samples = (0..=n)
            .map(|i| {
                let t = (t0 + i as f64 * cadence).min(t1);
                (t, watts(t))
            })
            .collect::<Vec<_>>();
        let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
        for s in samples {
            if dedup.last().map_or(true, |l| s.0 > l.0) {
                dedup.push(s);
            }
        }
        Self::new(dedup, idle_watts)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    fn watts_at(&self, t: f64) -> f64 {
        let i = self.samples.partition_point(|s| s.0 <= t);
        if i == 0 {
            return self.samples[0].1;
        }
        if i == self.samples.len() {
            return self.samples[i - 1].1;
        }
        let (ta, wa) = self.samples[i - 1];
        let (tb, wb) = self.samples[i];
        wa + (wb - wa) * (t - ta) / (tb - ta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// Joules per source frame.
    pub e_per_frame: f64,
    /// Average power above idle over the window, watts.
    pub mean_excess_power: f64,
}

/// Area under `max(a + (b − a)·s, 0)` for `s ∈ [0, 1]`, times `dt`.
fn positive_area(a: f64, b: f64, dt: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        0.5 * (a + b) * dt
    } else if a <= 0.0 && b <= 0.0 {
        0.0
    } else {
        let (p, n) = if a > 0.0 { (a, -b) } else { (b, -a) };
        0.5 * p * p / (p + n) * dt
    }
}

/// Integrates power above idle over `[t0, t1]` and spreads it over `n_src`
/// source frames.
///
/// Power is linearly interpolated between samples, which makes this the
/// trapezoidal rule wherever the trace stays above idle; segments that cross
/// the baseline are split at the crossing so dips below idle contribute
/// nothing.
pub fn integrate_energy(trace: &PowerTrace, t0: f64, t1: f64, n_src: usize) -> Result<EnergyEstimate> {
    if n_src == 0 {
        return Err(invalid("source frame count must be positive"));
    }
    if !(t1 > t0) {
        return Err(invalid(format!("empty integration window [{t0}, {t1}]")));
    }
    let eps = 1e-9 * (trace.end() - trace.start()).abs().max(1.0);
    if t0 < trace.start() - eps || t1 > trace.end() + eps {
        return Err(invalid(format!(
            "window [{t0}, {t1}] outside trace span [{}, {}]",
            trace.start(),
            trace.end()
        )));
    }
    let idle = trace.idle_watts;
    let mut knots = vec![t0];
    knots.extend(trace.samples.iter().map(|s| s.0).filter(|&t| t > t0 && t < t1));
    knots.push(t1);

    let mut joules = 0.0;
    for pair in knots.windows(2) {
        let (ta, tb) = (pair[0], pair[1]);
        let a = trace.watts_at(ta) - idle;
        let b = trace.watts_at(tb) - idle;
        joules += positive_area(a, b, tb - ta);
    }
    Ok(EnergyEstimate {
        e_per_frame: joules / n_src as f64,
        mean_excess_power: joules / (t1 - t0),
    })
}

/// Where a profiling run's power samples come from.
#[derive(Debug, Clone)]
pub enum PowerSource {
    /// Builds a constant trace from the detector's own per-call energy
    /// report, sampled at `cadence_s` over the busy window.
    Synthetic { idle_watts: f64, cadence_s: f64 },
    /// Reads consecutive busy windows off a recorded trace.
    Replay { trace: PowerTrace, cursor: f64 },
}

impl PowerSource {
    pub fn synthetic(idle_watts: f64) -> Self {
        Self::Synthetic {
            idle_watts,
            cadence_s: 0.05,
        }
    }

    pub fn replay(trace: PowerTrace) -> Self {
        let cursor = trace.start();
        Self::Replay { trace, cursor }
    }

    /// Energy attributed to a run that kept the device busy for `busy_s`
    /// seconds over `n_src` source frames.
    pub fn measure(&mut self, busy_s: f64, reported_j: f64, n_src: usize) -> Result<EnergyEstimate> {
        if !(busy_s > 0.0) {
            return Ok(EnergyEstimate {
                e_per_frame: 0.0,
                mean_excess_power: 0.0,
            });
        }
        match self {
            Self::Synthetic { idle_watts, cadence_s } => {
                let watts = *idle_watts + reported_j / busy_s;
                let trace = PowerTrace::sampled(0.0, busy_s, *cadence_s, *idle_watts, |_| watts)?;
                integrate_energy(&trace, 0.0, busy_s, n_src)
            }
            Self::Replay { trace, cursor } => {
                let t0 = *cursor;
                let t1 = t0 + busy_s;
                if t1 > trace.end() {
                    return Err(Error::Detector(format!(
                        "power trace exhausted: need [{t0}, {t1}], trace ends at {}",
                        trace.end()
                    )));
                }
                *cursor = t1;
                integrate_energy(trace, t0, t1, n_src)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace() {
        let tr = PowerTrace::new(vec![(0.0, 5.0), (10.0, 5.0)], 2.0).unwrap();
        let e = integrate_energy(&tr, 0.0, 10.0, 100).unwrap();
        assert!((e.e_per_frame - 0.3).abs() < 1e-15);
        assert!((e.mean_excess_power - 3.0).abs() < 1e-15);
    }

    #[test]
    fn idle_and_dips() {
        let tr = PowerTrace::new(vec![(0.0, 2.0), (10.0, 2.0)], 2.0).unwrap();
        let e = integrate_energy(&tr, 0.0, 10.0, 10).unwrap();
        assert_eq!((e.e_per_frame, e.mean_excess_power), (0.0, 0.0));

        // 4 W for 1 s, then a linear drop to 0 W over 1 s: above idle (2 W) for half of it
        let tr = PowerTrace::new(vec![(0.0, 4.0), (1.0, 4.0), (2.0, 0.0)], 2.0).unwrap();
        let e = integrate_energy(&tr, 0.0, 2.0, 1).unwrap();
        assert!((e.e_per_frame - (2.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn doubling_frames_halves_energy() {
        let tr = PowerTrace::sampled(0.0, 3.0, 0.05, 1.0, |t| 2.0 + t).unwrap();
        let a = integrate_energy(&tr, 0.5, 2.5, 10).unwrap();
        let b = integrate_energy(&tr, 0.5, 2.5, 20).unwrap();
        assert!((a.e_per_frame - 2.0 * b.e_per_frame).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PowerTrace::new(vec![], 0.0).is_err());
        assert!(PowerTrace::new(vec![(1.0, 1.0), (1.0, 2.0)], 0.0).is_err());
        assert!(PowerTrace::new(vec![(0.0, -1.0)], 0.0).is_err());
        let tr = PowerTrace::new(vec![(0.0, 5.0), (10.0, 5.0)], 2.0).unwrap();
        assert!(integrate_energy(&tr, 0.0, 10.0, 0).is_err());
        assert!(integrate_energy(&tr, 0.0, 11.0, 1).is_err());
    }

    #[test]
    fn synthetic_source_returns_reported_energy() {
        let mut src = PowerSource::synthetic(3.0);
        let e = src.measure(0.8, 4.0, 40).unwrap();
        assert!((e.e_per_frame - 0.1).abs() < 1e-12);
        assert!((e.mean_excess_power - 5.0).abs() < 1e-12);
    }

    #[test]
    fn replay_source_advances() {
        let tr = PowerTrace::new(vec![(0.0, 4.0), (1.0, 4.0), (1.0001, 6.0), (3.0, 6.0)], 2.0).unwrap();
        let mut src = PowerSource::replay(tr);
        let first = src.measure(1.0, 0.0, 1).unwrap();
        assert!((first.e_per_frame - 2.0).abs() < 1e-12);
        let second = src.measure(1.0, 0.0, 1).unwrap();
        assert!((second.e_per_frame - 4.0).abs() < 1e-3);
        assert!(src.measure(5.0, 0.0, 1).is_err());
    }
}
