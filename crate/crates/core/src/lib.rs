//! Runtime-adaptive detection stack.
//!
//! The crate covers the full offline-to-online path for an adaptive detector
//! deployment:
//!
//! * [`config_synth`] rewrites a base detector configuration graph into scaled,
//!   pruned family variants.
//! * [`temporal_metrics`] scores temporally annotated streams at frame and event
//!   level, with hold-last imputation for strided inference.
//! * [`ace_profiler`] sweeps a (model, resolution, stride) grid and produces
//!   accuracy/complexity/energy profiles.
//! * [`runtime_selector`] turns constraints and live telemetry into adaptive
//!   weights and picks an operating point with hysteresis.
//! * [`roi_tracker`] gates the detector to a Kalman-predicted crop.
//! * [`sim_harness`] closes the loop with synthetic detectors, gesture scripts
//!   and a battery/thermal device model.

pub mod ace_profiler;
pub mod config_synth;
pub mod detector;
pub mod error;
pub mod io;
pub mod roi_tracker;
pub mod runtime_selector;
pub mod sim_harness;
pub mod temporal_metrics;

pub use error::{Error, Result};
