use nalgebra::Vector3;

use super::OrbitState;
use crate::constants::EARTH_EQUATORIAL_RADIUS;

/// Cylindrical-shadow test: the spacecraft is behind the Earth relative to
/// the Sun and within one Earth radius of the shadow axis.
pub fn eclipse(state: &OrbitState, sun_direction: &Vector3<f64>) -> bool {
    shadowed(&state.position, sun_direction)
}

pub(crate) fn shadowed(position: &Vector3<f64>, sun_direction: &Vector3<f64>) -> bool {
    let along = position.dot(sun_direction);
    if along >= 0.0 {
        return false;
    }
    let transverse = position - along * sun_direction;
    transverse.norm() < EARTH_EQUATORIAL_RADIUS
}
