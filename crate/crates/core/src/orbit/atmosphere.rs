//! Exponential atmosphere with piecewise scale heights and a linear
//! solar-flux multiplier.
//!
//! Base layers are the CIRA-72 derived table (reference altitude, density,
//! scale height). The multiplier is linear in F10.7, equal to one at
//! [`REFERENCE_F107`] and to `m_min(h)` at the 65 SFU floor, where `m_min`
//! drops from 1 at 120 km to [`FLOOR_MULTIPLIER`] at 450 km and stays there.

use crate::error::{ModelError, Result};
use crate::orbit::solar::F107_FLOOR;

pub const MIN_ALTITUDE_M: f64 = 120e3;
pub const MAX_ALTITUDE_M: f64 = 1500e3;

/// Flux at which the base table applies, SFU.
pub const REFERENCE_F107: f64 = 180.0;
/// Density multiplier at the flux floor above the sensitivity knee.
pub const FLOOR_MULTIPLIER: f64 = 0.04;
const KNEE_LOW_KM: f64 = 120.0;
const KNEE_HIGH_KM: f64 = 450.0;

// (base altitude km, base density kg/m^3, scale height km)
const LAYERS: [(f64, f64, f64); 19] = [
    (100.0, 5.297e-7, 5.877),
    (110.0, 9.661e-8, 7.263),
    (120.0, 2.438e-8, 9.473),
    (130.0, 8.484e-9, 12.636),
    (140.0, 3.845e-9, 16.149),
    (150.0, 2.070e-9, 22.523),
    (180.0, 5.464e-10, 29.740),
    (200.0, 2.789e-10, 37.105),
    (250.0, 7.248e-11, 45.546),
    (300.0, 2.418e-11, 53.628),
    (350.0, 9.518e-12, 53.298),
    (400.0, 3.725e-12, 58.515),
    (450.0, 1.585e-12, 60.828),
    (500.0, 6.967e-13, 63.822),
    (600.0, 1.454e-13, 71.835),
    (700.0, 3.614e-14, 88.667),
    (800.0, 1.170e-14, 124.64),
    (900.0, 5.245e-15, 181.05),
    (1000.0, 3.019e-15, 268.00),
];

/// Mass density in kg/m^3 at `altitude_m` for solar flux `f10_7` (SFU).
pub fn atmosphere_density(altitude_m: f64, f10_7: f64) -> Result<f64> {
    if !(MIN_ALTITUDE_M..=MAX_ALTITUDE_M).contains(&altitude_m) {
        return Err(ModelError::AltitudeOutOfRange {
            altitude_m,
            min_m: MIN_ALTITUDE_M,
            max_m: MAX_ALTITUDE_M,
        });
    }
    if !(f10_7 >= F107_FLOOR) {
        return Err(ModelError::invalid(
            "f10_7",
            format!("must be >= {F107_FLOOR} SFU, got {f10_7}"),
        ));
    }
    Ok(density_unchecked(altitude_m, f10_7))
}

/// Same model without range checks; altitudes outside the table are
/// extrapolated from the nearest layer. Used inside integrators.
pub(crate) fn density_unchecked(altitude_m: f64, f10_7: f64) -> f64 {
    let h_km = altitude_m / 1e3;
    base_density(h_km) * solar_multiplier(h_km, f10_7.max(F107_FLOOR))
}

fn base_density(h_km: f64) -> f64 {
    let layer = LAYERS
        .iter()
        .rev()
        .find(|(h0, _, _)| h_km >= *h0)
        .unwrap_or(&LAYERS[0]);
    let (h0, rho0, scale) = *layer;
    rho0 * (-(h_km - h0) / scale).exp()
}

fn solar_multiplier(h_km: f64, f10_7: f64) -> f64 {
    let w = ((h_km - KNEE_LOW_KM) / (KNEE_HIGH_KM - KNEE_LOW_KM)).clamp(0.0, 1.0);
    let m_min = 1.0 - (1.0 - FLOOR_MULTIPLIER) * w;
    let x = (f10_7 - F107_FLOOR) / (REFERENCE_F107 - F107_FLOOR);
    m_min + (1.0 - m_min) * x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moderate_activity_400km_matches_tables_within_factor_three() {
        let rho = atmosphere_density(400e3, 140.0).unwrap();
        assert!(rho > 1e-12 && rho < 9e-12, "{rho}");
    }

    #[test]
    fn monotone_in_altitude_and_flux() {
        for f in [65.0, 100.0, 140.0, 190.0, 230.0, 300.0] {
            let mut prev = f64::INFINITY;
            let mut h = 120e3;
            while h <= 1500e3 {
                let rho = atmosphere_density(h, f).unwrap();
                assert!(rho > 0.0 && rho < prev, "h={h} f={f}");
                prev = rho;
                h += 1e3;
            }
        }
        for h in [150e3, 300e3, 400e3, 450e3, 800e3] {
            let lo = atmosphere_density(h, 140.0).unwrap();
            let hi = atmosphere_density(h, 230.0).unwrap();
            assert!(hi > lo);
        }
        assert!(
            atmosphere_density(350e3, 120.0).unwrap() > atmosphere_density(400e3, 120.0).unwrap()
        );
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(atmosphere_density(100e3, 140.0).is_err());
        assert!(atmosphere_density(1600e3, 140.0).is_err());
        assert!(atmosphere_density(400e3, 60.0).is_err());
        assert!(atmosphere_density(400e3, f64::NAN).is_err());
    }
}
