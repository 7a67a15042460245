use serde::{Deserialize, Serialize};

use crate::constants::SECONDS_PER_DAY;
use crate::error::{ensure_finite, ModelError, Result};

/// Onboard storage per WCP pulse: intensity class, basis and bit.
pub const WCP_BITS_PER_PULSE: f64 = 4.0;
/// Onboard storage per timestamped detection.
pub const TIMESTAMP_BITS_PER_EVENT: f64 = 20.0;

/// What the payload records during a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Wcp { pulse_rate: f64 },
    Entangled { pair_rate: f64 },
}

/// Bits stored on board over `duration` seconds of transmission.
pub fn data_budget(source: DataSource, duration: f64) -> Result<f64> {
    ensure_finite("duration", duration)?;
    if duration < 0.0 {
        return Err(ModelError::invalid("duration", "must be non-negative"));
    }
    Ok(match source {
        DataSource::Wcp { pulse_rate } => pulse_rate * duration * WCP_BITS_PER_PULSE,
        DataSource::Entangled { pair_rate } => pair_rate * duration * TIMESTAMP_BITS_PER_EVENT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Orbit-averaged generation, W.
    pub orbit_average_w: f64,
    pub battery_wh: f64,
    /// Payload draw while an experiment runs, W.
    pub experiment_draw_w: f64,
    /// Bus draw, always on, W.
    pub platform_draw_w: f64,
    pub depth_of_discharge_limit: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            orbit_average_w: 11.0,
            battery_wh: 30.0,
            experiment_draw_w: 10.0,
            platform_draw_w: 5.0,
            depth_of_discharge_limit: 0.3,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("orbit_average_w", self.orbit_average_w),
            ("battery_wh", self.battery_wh),
            ("experiment_draw_w", self.experiment_draw_w),
            ("platform_draw_w", self.platform_draw_w),
        ] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(ModelError::invalid(name, "must be non-negative"));
            }
        }
        if !(self.battery_wh > 0.0) {
            return Err(ModelError::invalid("battery_wh", "must be positive"));
        }
        if !(self.depth_of_discharge_limit > 0.0 && self.depth_of_discharge_limit < 1.0) {
            return Err(ModelError::invalid("depth_of_discharge_limit", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Recharge power available between experiments, W.
    pub fn surplus_w(&self) -> f64 {
        (self.orbit_average_w - self.platform_draw_w).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCheck {
    pub depth_of_discharge: f64,
    pub exceeds_limit: bool,
}

/// Battery depth of discharge for an experiment run entirely from the battery.
pub fn energy_budget(power: &PowerConfig, experiment_duration: f64) -> Result<EnergyCheck> {
    power.validate()?;
    ensure_finite("experiment_duration", experiment_duration)?;
    if experiment_duration < 0.0 {
        return Err(ModelError::invalid("experiment_duration", "must be non-negative"));
    }
    let wh = (power.experiment_draw_w + power.platform_draw_w) * experiment_duration / 3600.0;
    let dod = wh / power.battery_wh;
    Ok(EnergyCheck {
        depth_of_discharge: dod,
        exceeds_limit: dod > power.depth_of_discharge_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommsConfig {
    /// Classical downlink rate, bit/s.
    pub downlink_rate_bps: f64,
    /// Data returned per station contact, bytes.
    pub contact_yield_bytes: f64,
    pub station_count: u32,
    pub contacts_per_station_per_day: u32,
}

impl Default for CommsConfig {
    fn default() -> Self {
        Self {
            downlink_rate_bps: 100e6,
            contact_yield_bytes: 4.2e9,
            station_count: 3,
            contacts_per_station_per_day: 2,
        }
    }
}

impl CommsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("downlink_rate_bps", self.downlink_rate_bps),
            ("contact_yield_bytes", self.contact_yield_bytes),
        ] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(ModelError::invalid(name, "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn contacts_per_day(&self) -> u32 {
        self.station_count * self.contacts_per_station_per_day
    }

    /// Contact length needed to move one contact's yield, s.
    pub fn contact_duration(&self) -> f64 {
        if self.downlink_rate_bps > 0.0 {
            8.0 * self.contact_yield_bytes / self.downlink_rate_bps
        } else {
            f64::INFINITY
        }
    }
}

/// Backlog after one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BacklogSample {
    pub epoch: f64,
    pub generated_bytes: f64,
    /// Downlink capacity offered at this event.
    pub downlink_capacity_bytes: f64,
    pub backlog_bytes: f64,
}

/// Onboard data backlog over `[0, horizon)`.
///
/// Contacts are spread evenly through each day, the first half a spacing
/// after the start. At every event the backlog becomes
/// max(0, backlog + generated − capacity). Experiments are applied before a
/// contact at the same instant.
pub fn backlog_series(experiments: &[(f64, f64)], comms: &CommsConfig, horizon: f64) -> Result<Vec<BacklogSample>> {
    comms.validate()?;
    let mut events: Vec<(f64, f64, f64)> = experiments.iter().map(|&(t, bytes)| (t, bytes, 0.0)).collect();
    let per_day = comms.contacts_per_day();
    if per_day > 0 && comms.contact_yield_bytes > 0.0 {
        let spacing = SECONDS_PER_DAY / per_day as f64;
        let mut k = 0u64;
        loop {
            let t = (k as f64 + 0.5) * spacing;
            if t >= horizon {
                break;
            }
            events.push((t, 0.0, comms.contact_yield_bytes));
            k += 1;
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut backlog = 0.0;
    Ok(events
        .into_iter()
        .map(|(epoch, generated, capacity)| {
            backlog = (backlog + generated - capacity).max(0.0);
            BacklogSample {
                epoch,
                generated_bytes: generated,
                downlink_capacity_bytes: capacity,
                backlog_bytes: backlog,
            }
        })
        .collect())
}

/// Time from each experiment until the backlog first returns to zero, or
/// `None` if it never does inside the series.
pub fn clearance_times(series: &[BacklogSample]) -> Vec<Option<f64>> {
    series
        .iter()
        .enumerate()
        .filter(|(_, s)| s.generated_bytes > 0.0)
        .map(|(i, s)| series[i..].iter().find(|later| later.backlog_bytes == 0.0).map(|later| later.epoch - s.epoch))
        .collect()
}
