use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Solar-minimum floor of the 10.7 cm flux, SFU.
pub const F107_FLOOR: f64 = 65.0;
/// Length of the template solar cycle, years.
pub const CYCLE_YEARS: f64 = 11.0;
/// Years from the cycle anchor to the first template maximum.
pub const FIRST_MAX_YEARS: f64 = 6.5;

/// Calendar anchor of the solar-cycle template (start of Q1 2018).
pub fn cycle_anchor() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap()
}

/// Solar activity scenario for the cycles following deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolarActivity {
    /// No cycle at all; flux pinned at the floor.
    ExtendedMinimum,
    /// Cycles peaking at 140 SFU.
    VeryLow,
    /// Cycles peaking at 190 SFU.
    Moderate,
    /// Cycles peaking at 230 SFU.
    High,
}

impl SolarActivity {
    pub const ALL: [SolarActivity; 4] = [
        SolarActivity::ExtendedMinimum,
        SolarActivity::VeryLow,
        SolarActivity::Moderate,
        SolarActivity::High,
    ];

    /// Peak flux of each template cycle, SFU.
    pub fn peak_sfu(self) -> f64 {
        match self {
            SolarActivity::ExtendedMinimum => F107_FLOOR,
            SolarActivity::VeryLow => 140.0,
            SolarActivity::Moderate => 190.0,
            SolarActivity::High => 230.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolarActivity::ExtendedMinimum => "extended_minimum",
            SolarActivity::VeryLow => "very_low",
            SolarActivity::Moderate => "moderate",
            SolarActivity::High => "high",
        }
    }

    /// F10.7 at `years` after the cycle anchor: a raised cosine between the
    /// floor and the scenario peak, maximal at 6.5 + 11k years.
    pub fn f10_7(self, years: f64) -> f64 {
        let amplitude = self.peak_sfu() - F107_FLOOR;
        let phase = std::f64::consts::TAU * (years - FIRST_MAX_YEARS) / CYCLE_YEARS;
        F107_FLOOR + amplitude * 0.5 * (1.0 + phase.cos())
    }
}

impl std::str::FromStr for SolarActivity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolarActivity::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown solar activity scenario `{s}`"))
    }
}
