use super::TopoPoint;
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{ModelError, Result};

/// Round-trip velocity-aberration point-ahead angle 2·v⊥/c, µrad.
pub fn point_ahead(point: &TopoPoint) -> f64 {
    2.0 * point.transverse_velocity / SPEED_OF_LIGHT * 1e6
}

/// Signed wavelength shift λ·ṙ/c, nm. Positive (red) when receding.
pub fn doppler_shift(point: &TopoPoint, wavelength_nm: f64) -> f64 {
    wavelength_nm * point.range_rate / SPEED_OF_LIGHT
}

/// Refractivity n − 1 of standard dry air (15 °C, 101 325 Pa), Edlén 1966.
pub fn refractivity(wavelength_nm: f64) -> f64 {
    let sigma2 = (1e3 / wavelength_nm).powi(2);
    (64.328 + 29_498.1 / (146.0 - sigma2) + 255.4 / (41.0 - sigma2)) * 1e-6
}

/// Differential refraction between two wavelengths at `elevation_deg`, µrad.
///
/// Plane-parallel atmosphere: each wavelength bends by (n − 1)·tan z, so
/// the offset is |Δn|·tan z. Zero at zenith, growing toward the horizon.
pub fn dispersion_offset(elevation_deg: f64, wavelength_up_nm: f64, wavelength_down_nm: f64) -> Result<f64> {
    if !(10.0..=90.0).contains(&elevation_deg) {
        return Err(ModelError::invalid("elevation", "must lie in [10, 90] degrees"));
    }
    for (name, wl) in [("wavelength_up", wavelength_up_nm), ("wavelength_down", wavelength_down_nm)] {
        if !(350.0..=1600.0).contains(&wl) {
            return Err(ModelError::invalid(name, "must lie in [350, 1600] nm"));
        }
    }
    if elevation_deg == 90.0 {
        return Ok(0.0);
    }
    let zenith = (90.0 - elevation_deg).to_radians();
    let dn = (refractivity(wavelength_up_nm) - refractivity(wavelength_down_nm)).abs();
    Ok(dn * zenith.tan() * 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(transverse: f64, range_rate: f64) -> TopoPoint {
        TopoPoint {
            epoch: 0.0,
            elevation: 45.0,
            azimuth: 0.0,
            slant_range: 5e5,
            range_rate,
            transverse_velocity: transverse,
            in_eclipse: true,
        }
    }

    #[test]
    fn point_ahead_arithmetic() {
        assert_eq!(point_ahead(&point(0.0, 0.0)), 0.0);
        let pa = point_ahead(&point(7670.0, 0.0));
        assert!((pa - 51.2).abs() < 0.1, "{pa}");
    }

    #[test]
    fn doppler_arithmetic() {
        assert_eq!(doppler_shift(&point(0.0, 0.0), 800.0), 0.0);
        let d = doppler_shift(&point(0.0, 7670.0), 800.0);
        assert!((d - 0.0205).abs() / 0.0205 < 0.05, "{d}");
        assert!(doppler_shift(&point(0.0, -7670.0), 800.0) < 0.0);
    }

    #[test]
    fn dispersion_zero_cases_and_monotone() {
        assert_eq!(dispersion_offset(90.0, 532.0, 800.0).unwrap(), 0.0);
        assert_eq!(dispersion_offset(30.0, 800.0, 800.0).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for e in 10..=90 {
            let d = dispersion_offset(e as f64, 532.0, 800.0).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        assert!(dispersion_offset(5.0, 532.0, 800.0).is_err());
        assert!(dispersion_offset(30.0, 200.0, 800.0).is_err());
    }

    #[test]
    fn edlen_visible_refractivity() {
        // Standard air at 589 nm: n − 1 ≈ 2.77e-4.
        assert!((refractivity(589.0) - 2.77e-4).abs() < 3e-6);
    }
}
