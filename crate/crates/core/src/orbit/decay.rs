use chrono::{DateTime, Utc};
use serde::Serialize;

use super::atmosphere::density_unchecked;
use super::propagate::DEORBIT_FLOOR_M;
use super::solar::{cycle_anchor, SolarActivity};
use super::SpacecraftBody;
use crate::constants::{EARTH_EQUATORIAL_RADIUS, MU_EARTH, SECONDS_PER_DAY, SECONDS_PER_YEAR};
use crate::error::{ModelError, Result};

pub const LIFETIME_CAP_YEARS: f64 = 100.0;
const MIN_START_ALTITUDE_M: f64 = 300e3;
const MAX_START_ALTITUDE_M: f64 = 500e3;
/// Sub-step a day whenever the predicted daily drop exceeds this, m.
const MAX_DROP_PER_STEP_M: f64 = 2_000.0;

/// Result of the orbit-averaged decay integration.
#[derive(Debug, Clone, Serialize)]
pub struct LifetimeEstimate {
    /// Years from start until the floor is crossed, or the cap.
    pub years: f64,
    /// Lifetime reached the 100-year cap without re-entry.
    pub capped: bool,
    /// (years since start, altitude in m), one sample per day.
    pub profile: Vec<(f64, f64)>,
}

/// Orbital lifetime of a circular orbit under drag.
///
/// The semi-major axis obeys da/dt = -ρ(h, F10.7(t)) · (Cd·A/m) · √(μa),
/// integrated with a midpoint rule in daily steps (sub-divided when the
/// orbit drops quickly near re-entry).
pub fn deorbit_lifetime(
    initial_altitude_m: f64,
    body: &SpacecraftBody,
    solar: SolarActivity,
    start: DateTime<Utc>,
) -> Result<LifetimeEstimate> {
    body.validate()?;
    if !(MIN_START_ALTITUDE_M..=MAX_START_ALTITUDE_M).contains(&initial_altitude_m) {
        return Err(ModelError::AltitudeOutOfRange {
            altitude_m: initial_altitude_m,
            min_m: MIN_START_ALTITUDE_M,
            max_m: MAX_START_ALTITUDE_M,
        });
    }
    let b = body.ballistic_factor();
    let year0 = (start - cycle_anchor()).num_milliseconds() as f64 / 1000.0 / SECONDS_PER_YEAR;
    let rate = |t: f64, a: f64| {
        let f = solar.f10_7(year0 + t / SECONDS_PER_YEAR);
        -density_unchecked(a - EARTH_EQUATORIAL_RADIUS, f) * b * (MU_EARTH * a).sqrt()
    };

    let floor = EARTH_EQUATORIAL_RADIUS + DEORBIT_FLOOR_M;
    let cap = LIFETIME_CAP_YEARS * SECONDS_PER_YEAR;
    let mut a = EARTH_EQUATORIAL_RADIUS + initial_altitude_m;
    let mut t = 0.0;
    let mut profile = vec![(0.0, initial_altitude_m)];

    while t < cap {
        let mut remaining = SECONDS_PER_DAY;
        while remaining > 0.0 && a > floor {
            let probe = rate(t, a) * remaining;
            let h = if -probe > MAX_DROP_PER_STEP_M {
                (remaining * MAX_DROP_PER_STEP_M / -probe).max(1.0)
            } else {
                remaining
            };
            let k1 = rate(t, a);
            let k2 = rate(t + 0.5 * h, a + 0.5 * h * k1);
            let next = a + h * k2;
            if next <= floor {
                // Interpolate the crossing inside the step.
                let frac = (a - floor) / (a - next);
                t += frac * h;
                a = floor;
                break;
            }
            a = next;
            t += h;
            remaining -= h;
        }
        profile.push((t / SECONDS_PER_YEAR, a - EARTH_EQUATORIAL_RADIUS));
        if a <= floor {
            return Ok(LifetimeEstimate {
                years: t / SECONDS_PER_YEAR,
                capped: false,
                profile,
            });
        }
    }
    Ok(LifetimeEstimate {
        years: LIFETIME_CAP_YEARS,
        capped: true,
        profile,
    })
}
