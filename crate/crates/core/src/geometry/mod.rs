//! Station-relative geometry on a spherical, rigidly rotating Earth.

mod offsets;
mod passes;

pub use offsets::{dispersion_offset, doppler_shift, point_ahead, refractivity};
pub use passes::{find_passes, PassEvent, PassFinder, MAX_PASS_CADENCE_S};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{EARTH_MEAN_RADIUS, EARTH_ROTATION_RATE};
use crate::error::{ModelError, Result};
use crate::orbit::{eclipse, OrbitState};
use crate::time::ScenarioClock;

/// Optical ground station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub name: String,
    /// Degrees, north positive.
    pub latitude: f64,
    /// Degrees, east positive.
    pub longitude: f64,
    /// Metres above the reference sphere.
    pub altitude: f64,
    /// Passes are tracked above this elevation, degrees.
    pub min_track_elevation: f64,
    /// Passes must culminate at or above this elevation, degrees.
    pub min_experiment_culmination: f64,
}

impl Default for GroundStation {
    /// Matera laser ranging observatory.
    fn default() -> Self {
        Self {
            name: "Matera".to_string(),
            latitude: 40.6486,
            longitude: 16.7046,
            altitude: 536.0,
            min_track_elevation: 10.0,
            min_experiment_culmination: 30.0,
        }
    }
}

impl GroundStation {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(ModelError::invalid("latitude", "must lie in [-90, 90] degrees"));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(ModelError::invalid("longitude", "must lie in [-180, 180] degrees"));
        }
        if !self.altitude.is_finite() {
            return Err(ModelError::invalid("altitude", "must be finite"));
        }
        if !(self.min_track_elevation < self.min_experiment_culmination) {
            return Err(ModelError::invalid(
                "min_track_elevation",
                "must be below min_experiment_culmination",
            ));
        }
        Ok(())
    }

    fn radius(&self) -> f64 {
        EARTH_MEAN_RADIUS + self.altitude
    }
}

/// Spacecraft as seen from the station at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoPoint {
    /// Seconds since scenario start.
    pub epoch: f64,
    /// Degrees.
    pub elevation: f64,
    /// Degrees clockwise from north, [0, 360).
    pub azimuth: f64,
    /// Metres.
    pub slant_range: f64,
    /// Positive when receding, m/s.
    pub range_rate: f64,
    /// Relative velocity perpendicular to the line of sight, m/s.
    pub transverse_velocity: f64,
    pub in_eclipse: bool,
}

/// Station frame at a given epoch (inertial axes).
#[derive(Debug, Clone, Copy)]
struct StationFrame {
    position: Vector3<f64>,
    velocity: Vector3<f64>,
    up: Vector3<f64>,
    east: Vector3<f64>,
    north: Vector3<f64>,
}

/// A ground station tied to a scenario clock.
#[derive(Debug, Clone)]
pub struct Observer {
    pub station: GroundStation,
    pub clock: ScenarioClock,
}

impl Observer {
    pub fn new(station: GroundStation, clock: ScenarioClock) -> Result<Self> {
        station.validate()?;
        Ok(Self { station, clock })
    }

    fn frame(&self, epoch: f64) -> StationFrame {
        let lat = self.station.latitude.to_radians();
        let lon = self.clock.gmst(epoch) + self.station.longitude.to_radians();
        let (slat, clat) = lat.sin_cos();
        let (slon, clon) = lon.sin_cos();
        let up = Vector3::new(clat * clon, clat * slon, slat);
        let east = Vector3::new(-slon, clon, 0.0);
        let north = up.cross(&east);
        let position = self.station.radius() * up;
        let velocity = Vector3::new(
            -EARTH_ROTATION_RATE * position.y,
            EARTH_ROTATION_RATE * position.x,
            0.0,
        );
        StationFrame {
            position,
            velocity,
            up,
            east,
            north,
        }
    }

    /// Inertial position of the station, m.
    pub fn station_position(&self, epoch: f64) -> Vector3<f64> {
        self.frame(epoch).position
    }

    /// Sun elevation above the local horizon, degrees.
    pub fn sun_elevation(&self, epoch: f64) -> f64 {
        let sun = self.clock.sun_direction(epoch);
        sun.dot(&self.frame(epoch).up).asin().to_degrees()
    }

    /// Topocentric view of `state`, with the eclipse flag evaluated for the
    /// clock's Sun direction.
    pub fn topocentric(&self, state: &OrbitState) -> TopoPoint {
        let sun = self.clock.sun_direction(state.epoch);
        self.topocentric_with_sun(state, &sun)
    }

    /// Topocentric view with an explicit Sun direction.
    pub fn topocentric_with_sun(&self, state: &OrbitState, sun_direction: &Vector3<f64>) -> TopoPoint {
        let f = self.frame(state.epoch);
        let rho = state.position - f.position;
        let range = rho.norm();
        let los = rho / range;
        let v_rel = state.velocity - f.velocity;
        let range_rate = v_rel.dot(&los);
        let transverse = (v_rel - range_rate * los).norm();
        let vertical = los.dot(&f.up);
        let horizontal = (los - vertical * f.up).norm();
        let elevation = vertical.atan2(horizontal).to_degrees();
        let azimuth = los
            .dot(&f.east)
            .atan2(los.dot(&f.north))
            .to_degrees()
            .rem_euclid(360.0);
        TopoPoint {
            epoch: state.epoch,
            elevation,
            azimuth,
            slant_range: range,
            range_rate,
            transverse_velocity: transverse,
            in_eclipse: eclipse(state, sun_direction),
        }
    }

    /// Elevation only; cheaper than a full [`TopoPoint`].
    pub fn elevation(&self, state: &OrbitState) -> f64 {
        let f = self.frame(state.epoch);
        let rho = state.position - f.position;
        let vertical = rho.dot(&f.up);
        vertical.atan2((rho - vertical * f.up).norm()).to_degrees()
    }
}

/// Slant range to a spacecraft at `altitude_m` seen at `elevation_deg` from
/// the surface of a sphere of radius `earth_radius_m`.
pub fn slant_range_at_elevation(elevation_deg: f64, altitude_m: f64, earth_radius_m: f64) -> f64 {
    let e = elevation_deg.to_radians();
    let r = earth_radius_m + altitude_m;
    (r * r - (earth_radius_m * e.cos()).powi(2)).sqrt() - earth_radius_m * e.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn observer_at(lat: f64, lon: f64) -> Observer {
        let station = GroundStation {
            name: "test".into(),
            latitude: lat,
            longitude: lon,
            altitude: 0.0,
            ..GroundStation::default()
        };
        Observer::new(station, ScenarioClock::default()).unwrap()
    }

    #[test]
    fn zenith_geometry() {
        let obs = observer_at(40.0, 10.0);
        let st = obs.station_position(0.0);
        let pos = st.normalize() * (EARTH_MEAN_RADIUS + 400e3);
        let p = obs.topocentric(&OrbitState::new(0.0, pos, Vector3::new(0.0, 0.0, 7600.0)));
        assert!((p.elevation - 90.0).abs() < 1e-9);
        assert!((p.slant_range - 400e3).abs() < 1e-6);
    }

    #[test]
    fn elevation_twenty_degrees_slant_range() {
        let r = slant_range_at_elevation(20.0, 400e3, EARTH_MEAN_RADIUS);
        assert!((r - 984e3).abs() < 1e3, "{r}");
    }

    #[test]
    fn pole_cannot_see_equatorial_orbit() {
        let obs = observer_at(90.0, 0.0);
        for k in 0..360 {
            let s = OrbitState::circular(k as f64 * 15.0, 400e3, 0.0, 0.0, k as f64);
            assert!(obs.elevation(&s) < 0.0);
        }
    }

    #[test]
    fn matches_law_of_cosines_on_random_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let obs = observer_at(rng.random_range(-80.0..80.0), rng.random_range(-180.0..180.0));
            let epoch = rng.random_range(0.0..86_400.0);
            let st = obs.station_position(epoch);
            let up = st.normalize();
            // Random direction in the upper hemisphere, random altitude.
            let mut d = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            if d.dot(&up) < 0.05 {
                d = (d + up).normalize();
            }
            let h = rng.random_range(250e3..600e3);
            // Place the spacecraft along d at the range giving altitude h.
            let b = st.dot(&d);
            let c = st.norm_squared() - (EARTH_MEAN_RADIUS + h).powi(2);
            let range = -b + (b * b - c).sqrt();
            let p = obs.topocentric(&OrbitState::new(epoch, st + range * d, Vector3::zeros()));
            let oracle = slant_range_at_elevation(p.elevation, h, EARTH_MEAN_RADIUS);
            assert!((p.slant_range - oracle).abs() < 1.0, "{} vs {}", p.slant_range, oracle);
        }
    }
}
