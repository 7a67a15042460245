//! Calendar anchoring for scenario epochs.
//!
//! Every model works in "seconds since scenario start". The clock maps
//! those seconds to Earth orientation and to the Sun direction.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{OBLIQUITY_DEG, SECONDS_PER_DAY};

/// Scenario time origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioClock {
    start: DateTime<Utc>,
}

impl ScenarioClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self { start }
    }

    /// Clock starting at midnight UTC on the given date.
    pub fn from_date(year: i32, month: u32, day: u32) -> Option<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)?;
        let dt = date.and_hms_opt(0, 0, 0)?;
        Some(Self::new(Utc.from_utc_datetime(&dt)))
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    /// Days from J2000.0 (2000-01-01 12:00 UTC; the TT/UTC offset is ignored).
    pub fn days_since_j2000(&self, epoch_s: f64) -> f64 {
        let j2000 = Utc.with_ymd_and_hms(2000, 1, 1, 12, 0, 0).unwrap();
        let offset = (self.start - j2000).num_milliseconds() as f64 / 1000.0;
        (offset + epoch_s) / SECONDS_PER_DAY
    }

    /// Greenwich mean sidereal angle, radians in [0, 2π).
    pub fn gmst(&self, epoch_s: f64) -> f64 {
        let d = self.days_since_j2000(epoch_s);
        let deg = 280.460_618_37 + 360.985_647_366_29 * d;
        deg.rem_euclid(360.0).to_radians()
    }

    /// Unit vector towards the Sun in the inertial frame (circular ecliptic orbit).
    pub fn sun_direction(&self, epoch_s: f64) -> Vector3<f64> {
        let d = self.days_since_j2000(epoch_s);
        let lambda = (280.460 + 0.985_647_4 * d).rem_euclid(360.0).to_radians();
        let eps = OBLIQUITY_DEG.to_radians();
        Vector3::new(lambda.cos(), eps.cos() * lambda.sin(), eps.sin() * lambda.sin())
    }

    /// Fractional years since the given calendar anchor.
    pub fn years_since(&self, anchor: DateTime<Utc>, epoch_s: f64) -> f64 {
        let offset = (self.start - anchor).num_milliseconds() as f64 / 1000.0;
        (offset + epoch_s) / crate::constants::SECONDS_PER_YEAR
    }
}

impl Default for ScenarioClock {
    fn default() -> Self {
        Self::from_date(2018, 1, 1).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sun_is_unit_and_near_vernal_equinox_in_march() {
        let clock = ScenarioClock::from_date(2018, 3, 20).unwrap();
        let s = clock.sun_direction(16.0 * 3600.0);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        // Right at the equinox the Sun sits on the +x axis.
        assert!(s.x > 0.999, "{s:?}");
    }

    #[test]
    fn gmst_advances_one_turn_per_sidereal_day() {
        let clock = ScenarioClock::default();
        let a = clock.gmst(0.0);
        let b = clock.gmst(86_164.0905);
        let diff = (b - a).rem_euclid(std::f64::consts::TAU);
        assert!(diff < 1e-5 || diff > std::f64::consts::TAU - 1e-5);
    }
}
