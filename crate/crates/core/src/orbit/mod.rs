//! Orbit dynamics: two-body gravity with J2 and drag, shadow geometry and
//! long-term decay.

mod atmosphere;
mod decay;
mod eclipse;
mod propagate;
mod solar;

pub use atmosphere::{atmosphere_density, MAX_ALTITUDE_M, MIN_ALTITUDE_M};
pub use decay::{deorbit_lifetime, LifetimeEstimate, LIFETIME_CAP_YEARS};
pub use eclipse::eclipse;
pub use propagate::{propagate, PropagationSettings, Propagator, Trajectory, DEORBIT_FLOOR_M};
pub use solar::{cycle_anchor, SolarActivity, F107_FLOOR};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{EARTH_EQUATORIAL_RADIUS, J2, MU_EARTH};
use crate::error::{ensure_finite, ModelError, Result};

/// Spacecraft position and velocity in the Earth-centred inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitState {
    /// Seconds since scenario start.
    pub epoch: f64,
    /// Metres.
    pub position: Vector3<f64>,
    /// Metres per second.
    pub velocity: Vector3<f64>,
}

impl OrbitState {
    pub fn new(epoch: f64, position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            epoch,
            position,
            velocity,
        }
    }

    /// Circular orbit at `altitude_m` above the equatorial radius.
    ///
    /// `raan_deg` is the right ascension of the ascending node and
    /// `arg_latitude_deg` the angle from the node along the orbit.
    pub fn circular(
        epoch: f64,
        altitude_m: f64,
        inclination_deg: f64,
        raan_deg: f64,
        arg_latitude_deg: f64,
    ) -> Self {
        let r = EARTH_EQUATORIAL_RADIUS + altitude_m;
        let v = (MU_EARTH / r).sqrt();
        let (si, ci) = inclination_deg.to_radians().sin_cos();
        let (so, co) = raan_deg.to_radians().sin_cos();
        let (su, cu) = arg_latitude_deg.to_radians().sin_cos();
        // Perifocal-like basis: node line p, in-plane normal q.
        let p = Vector3::new(co, so, 0.0);
        let q = Vector3::new(-so * ci, co * ci, si);
        let position = r * (cu * p + su * q);
        let velocity = v * (-su * p + cu * q);
        Self::new(epoch, position, velocity)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("epoch", self.epoch)?;
        for c in self.position.iter() {
            ensure_finite("position", *c)?;
        }
        for c in self.velocity.iter() {
            ensure_finite("velocity", *c)?;
        }
        if self.position.norm() <= EARTH_EQUATORIAL_RADIUS {
            return Err(ModelError::invalid(
                "position",
                "radius must exceed the Earth equatorial radius",
            ));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.position.norm()
    }

    /// Height above the equatorial radius, m.
    pub fn altitude(&self) -> f64 {
        self.radius() - EARTH_EQUATORIAL_RADIUS
    }

    /// Specific mechanical energy including the J2 potential, J/kg.
    /// Conserved by the propagator when drag is off.
    pub fn specific_energy(&self) -> f64 {
        let r = self.radius();
        let sin_lat = self.position.z / r;
        let j2_term = J2 * (EARTH_EQUATORIAL_RADIUS / r).powi(2) * 0.5 * (3.0 * sin_lat * sin_lat - 1.0);
        0.5 * self.velocity.norm_squared() - MU_EARTH / r * (1.0 - j2_term)
    }

    /// Semi-major axis implied by the total energy, m. Unlike the osculating
    /// value it carries no short-period J2 ripple, so drag makes it
    /// monotonically non-increasing.
    pub fn energy_semi_major_axis(&self) -> f64 {
        -MU_EARTH / (2.0 * self.specific_energy())
    }

    /// Osculating two-body semi-major axis from vis-viva, m.
    pub fn osculating_semi_major_axis(&self) -> f64 {
        1.0 / (2.0 / self.radius() - self.velocity.norm_squared() / MU_EARTH)
    }

    /// Keplerian period for the energy semi-major axis, s.
    pub fn period(&self) -> f64 {
        let a = self.energy_semi_major_axis();
        std::f64::consts::TAU * (a.powi(3) / MU_EARTH).sqrt()
    }

    /// Right ascension of the ascending node, radians in [0, 2π).
    pub fn raan(&self) -> f64 {
        let h = self.position.cross(&self.velocity);
        // Node vector = z × h.
        let n = Vector3::new(-h.y, h.x, 0.0);
        n.y.atan2(n.x).rem_euclid(std::f64::consts::TAU)
    }

    pub fn inclination(&self) -> f64 {
        let h = self.position.cross(&self.velocity);
        (h.z / h.norm()).acos()
    }
}

/// Mass and drag properties of the spacecraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftBody {
    /// kg.
    pub mass: f64,
    /// Projected area in the minimum-drag attitude, m^2.
    pub min_drag_area: f64,
    pub drag_coefficient: f64,
}

impl Default for SpacecraftBody {
    /// 6U CubeSat (12 cm × 24 cm face forward), 10 kg.
    fn default() -> Self {
        Self {
            mass: 10.0,
            min_drag_area: 0.12 * 0.24,
            drag_coefficient: 2.2,
        }
    }
}

impl SpacecraftBody {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(ModelError::invalid("mass", "must be positive"));
        }
        if !(self.min_drag_area > 0.0 && self.min_drag_area.is_finite()) {
            return Err(ModelError::invalid("min_drag_area", "must be positive"));
        }
        if !(1.5..=3.0).contains(&self.drag_coefficient) {
            return Err(ModelError::invalid(
                "drag_coefficient",
                format!("must lie in [1.5, 3.0], got {}", self.drag_coefficient),
            ));
        }
        Ok(())
    }

    /// Cd·A/m, m^2/kg.
    pub fn ballistic_factor(&self) -> f64 {
        self.drag_coefficient * self.min_drag_area / self.mass
    }
}
