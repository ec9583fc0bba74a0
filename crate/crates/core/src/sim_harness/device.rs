use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::runtime_selector::TelemetrySample;

/// Battery, first-order thermal and utilization model of an edge device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub battery_capacity_wh: f64,
    /// Fraction in [0, 1].
    pub state_of_charge: f64,
    pub idle_power_w: f64,
    pub ambient_c: f64,
    /// Steady-state temperature rise per watt of compute power.
    pub heat_coeff_c_per_w: f64,
    /// Thermal time constant in seconds.
    pub tau_s: f64,
    pub temperature_c: f64,
    #[serde(default)]
    pub clock_s: f64,
    /// Energy drawn by compute since construction, joules.
    #[serde(default)]
    pub energy_drawn_j: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            battery_capacity_wh: 50.0,
            state_of_charge: 1.0,
            idle_power_w: 5.0,
            ambient_c: 35.0,
            heat_coeff_c_per_w: 4.0,
            tau_s: 30.0,
            temperature_c: 35.0,
            clock_s: 0.0,
            energy_drawn_j: 0.0,
        }
    }
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.battery_capacity_wh > 0.0) || !(self.tau_s > 0.0) {
            return Err(invalid("battery capacity and thermal time constant must be positive"));
        }
        if !(0.0..=1.0).contains(&self.state_of_charge) {
            return Err(invalid(format!("state of charge {} outside [0, 1]", self.state_of_charge)));
        }
        if !(self.heat_coeff_c_per_w >= 0.0) || !(self.idle_power_w >= 0.0) {
            return Err(invalid("heat coefficient and idle power must be non-negative"));
        }
        Ok(())
    }

    /// Current state as a telemetry reading, without advancing time.
    pub fn sample(&self, gpu_util_pct: f64, power_w: f64) -> TelemetrySample {
        TelemetrySample {
            timestamp: self.clock_s,
            battery_pct: 100.0 * self.state_of_charge,
            cpu_temp_c: self.temperature_c,
            gpu_temp_c: self.temperature_c,
            gpu_util_pct,
            power_w,
        }
    }
}

/// Advances the device by `dt` seconds during which compute drew
/// `energy_j` joules and kept the accelerator busy for `busy_s` seconds.
pub fn step_device(device: &mut DeviceModel, energy_j: f64, busy_s: f64, dt: f64) -> Result<TelemetrySample> {
    if !(dt > 0.0) {
        return Err(invalid(format!("time step {dt} must be positive")));
    }
    if !(energy_j >= 0.0) || !(busy_s >= 0.0) {
        return Err(invalid("energy and busy time must be non-negative"));
    }
    let compute_w = energy_j / dt;
    device.state_of_charge = (device.state_of_charge - energy_j / (device.battery_capacity_wh * 3600.0)).max(0.0);
    let steady = device.ambient_c + device.heat_coeff_c_per_w * compute_w;
    device.temperature_c = steady + (device.temperature_c - steady) * (-dt / device.tau_s).exp();
    device.clock_s += dt;
    device.energy_drawn_j += energy_j;
    let util = (100.0 * busy_s / dt).clamp(0.0, 100.0);
    Ok(device.sample(util, device.idle_power_w + compute_w))
}
