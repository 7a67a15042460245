//! Free-space optical downlink budget.
//!
//! Both source kinds are treated as Gaussian in the far field. The flat-top
//! aperture is mapped onto the Gaussian with the same HWHM.

use serde::{Deserialize, Serialize};

use crate::constants::EARTH_MEAN_RADIUS;
use crate::error::{ensure_finite, ModelError, Result};
use crate::geometry::{slant_range_at_elevation, TopoPoint};

/// Airy-pattern HWHM coefficient for a uniformly illuminated circular aperture.
const AIRY_HWHM: f64 = 0.514;

/// Converts an intensity HWHM to the 1/e² half-width of the same Gaussian.
fn hwhm_to_1e2() -> f64 {
    (2.0 / std::f64::consts::LN_2).sqrt()
}

fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BeamShape {
    /// Nearly flat wavefront filling the telescope; diameter in metres.
    FlatTopAperture { aperture_diameter: f64 },
    /// Gaussian beam; 1/e² intensity radius at the waist in metres.
    GaussianWaist { waist_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalSourceGeometry {
    pub shape: BeamShape,
    pub wavelength_nm: f64,
    /// Clear aperture of the transmit telescope, metres.
    pub telescope_aperture: f64,
}

impl OpticalSourceGeometry {
    pub const TELESCOPE_APERTURE_M: f64 = 0.09;

    /// Weak-coherent-pulse source filling the 90 mm telescope at 800 nm.
    pub fn wcp() -> Self {
        Self::flat_top(Self::TELESCOPE_APERTURE_M, 800.0)
    }

    /// Entangled-pair source, 65 mm waist diameter at 800 nm.
    pub fn entangled() -> Self {
        Self::gaussian(0.0325, 800.0)
    }

    pub fn flat_top(aperture_diameter: f64, wavelength_nm: f64) -> Self {
        Self {
            shape: BeamShape::FlatTopAperture { aperture_diameter },
            wavelength_nm,
            telescope_aperture: aperture_diameter.max(Self::TELESCOPE_APERTURE_M),
        }
    }

    pub fn gaussian(waist_radius: f64, wavelength_nm: f64) -> Self {
        Self {
            shape: BeamShape::GaussianWaist { waist_radius },
            wavelength_nm,
            telescope_aperture: Self::TELESCOPE_APERTURE_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("wavelength_nm", self.wavelength_nm)?;
        if self.wavelength_nm <= 0.0 {
            return Err(ModelError::invalid("wavelength_nm", "must be positive"));
        }
        if !(self.telescope_aperture > 0.0) {
            return Err(ModelError::invalid("telescope_aperture", "must be positive"));
        }
        match self.shape {
            BeamShape::FlatTopAperture { aperture_diameter } => {
                if !(aperture_diameter > 0.0) {
                    return Err(ModelError::invalid("aperture_diameter", "must be positive"));
                }
            }
            BeamShape::GaussianWaist { waist_radius } => {
                if !(waist_radius > 0.0) {
                    return Err(ModelError::invalid("waist_radius", "must be positive"));
                }
                if 2.0 * waist_radius > self.telescope_aperture {
                    return Err(ModelError::invalid(
                        "waist_radius",
                        format!(
                            "waist diameter {:.1} mm exceeds the {:.1} mm telescope aperture",
                            2e3 * waist_radius,
                            1e3 * self.telescope_aperture
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reported divergence half-angle, µrad.
    ///
    /// Flat-top: Airy HWHM 0.514·λ/D. Gaussian: λ/(π·w0), the 1/e² half-angle.
    pub fn divergence_half_angle(&self) -> f64 {
        let lambda = self.wavelength_nm * 1e-9;
        let rad = match self.shape {
            BeamShape::FlatTopAperture { aperture_diameter } => AIRY_HWHM * lambda / aperture_diameter,
            BeamShape::GaussianWaist { waist_radius } => lambda / (std::f64::consts::PI * waist_radius),
        };
        rad * 1e6
    }

    /// 1/e² intensity half-angle of the far-field Gaussian profile, µrad.
    pub fn beam_half_angle(&self) -> f64 {
        match self.shape {
            BeamShape::FlatTopAperture { .. } => self.divergence_half_angle() * hwhm_to_1e2(),
            BeamShape::GaussianWaist { .. } => self.divergence_half_angle(),
        }
    }
}

/// Spot diameter at the divergence contour, metres.
pub fn ground_spot(source: &OpticalSourceGeometry, slant_range: f64) -> f64 {
    2.0 * source.divergence_half_angle() * 1e-6 * slant_range
}

/// 1/e² radius of the far-field beam at `slant_range`, metres.
pub fn beam_radius(source: &OpticalSourceGeometry, slant_range: f64) -> f64 {
    source.beam_half_angle() * 1e-6 * slant_range
}

/// Fraction of a centred Gaussian beam of 1/e² radius `beam_radius`
/// collected by a circular aperture.
pub fn capture_fraction(beam_radius: f64, receiver_diameter: f64) -> f64 {
    let a = 0.5 * receiver_diameter;
    -(-2.0 * a * a / (beam_radius * beam_radius)).exp_m1()
}

/// Clear-sky transmittance, airmass-scaled from a zenith value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereModel {
    /// Transmittance at 800 nm and 20° from zenith.
    pub transmittance_800nm_at_20deg: f64,
    /// Optical depth scales as (800 nm / λ)^exponent.
    pub wavelength_exponent: f64,
}

impl Default for AtmosphereModel {
    fn default() -> Self {
        Self {
            transmittance_800nm_at_20deg: 0.70,
            wavelength_exponent: 2.0,
        }
    }
}

impl AtmosphereModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance_800nm_at_20deg > 0.0 && self.transmittance_800nm_at_20deg <= 1.0) {
            return Err(ModelError::invalid("transmittance_800nm_at_20deg", "must lie in (0, 1]"));
        }
        ensure_finite("wavelength_exponent", self.wavelength_exponent)
    }

    /// Zenith optical depth at `wavelength_nm`.
    pub fn zenith_optical_depth(&self, wavelength_nm: f64) -> f64 {
        let tau_800 = -self.transmittance_800nm_at_20deg.ln() * 20f64.to_radians().cos();
        tau_800 * (800.0 / wavelength_nm).powf(self.wavelength_exponent)
    }

    pub fn transmittance(&self, elevation_deg: f64, wavelength_nm: f64) -> Result<f64> {
        if !(10.0..=90.0).contains(&elevation_deg) {
            return Err(ModelError::invalid("elevation", "must lie in [10, 90] degrees"));
        }
        if !(wavelength_nm > 0.0) {
            return Err(ModelError::invalid("wavelength_nm", "must be positive"));
        }
        let airmass = 1.0 / elevation_deg.to_radians().sin();
        Ok((-self.zenith_optical_depth(wavelength_nm) * airmass).exp())
    }
}

/// Transmittance with the default calibration.
pub fn atmospheric_transmittance(elevation_deg: f64, wavelength_nm: f64) -> Result<f64> {
    AtmosphereModel::default().transmittance(elevation_deg, wavelength_nm)
}

/// Mean on-axis intensity loss of a Gaussian beam under independent per-axis
/// Gaussian jitter `sigma`, both in µrad. `beam_half_angle` is the 1/e² half-angle.
///
/// E[exp(−2r²/w²)] over a Rayleigh-distributed r is 1/(1 + 4σ²/w²).
pub fn pointing_loss(jitter_sigma: f64, beam_half_angle: f64) -> Result<f64> {
    if !(jitter_sigma >= 0.0) {
        return Err(ModelError::invalid("jitter_sigma", "must be non-negative"));
    }
    if !(beam_half_angle > 0.0) {
        return Err(ModelError::invalid("beam_half_angle", "must be positive"));
    }
    let k = jitter_sigma / beam_half_angle;
    Ok(-to_db(1.0 + 4.0 * k * k))
}

/// Instantaneous intensity ratio for a radial mispointing `offset`, µrad.
pub fn offset_intensity(offset: f64, beam_half_angle: f64) -> f64 {
    (-2.0 * (offset / beam_half_angle).powi(2)).exp()
}

/// Itemised downlink losses in dB. Every entry is ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub diffraction_geometric_loss: f64,
    pub pointing_loss: f64,
    pub atmospheric_loss: f64,
    pub optics_efficiency_loss: f64,
    pub total: f64,
    pub ground_spot_diameter: f64,
    pub slant_range: f64,
}

impl LinkBudget {
    /// End-to-end power transmission, excluding detector efficiency.
    pub fn transmission(&self) -> f64 {
        10f64.powf(self.total / 10.0)
    }
}

/// Receiver and loss parameters that stay fixed over a pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParameters {
    /// Ground telescope diameter, metres.
    pub receiver_diameter: f64,
    /// Per-axis pointing jitter, µrad.
    pub jitter_sigma: f64,
    /// Transmitter and receiver optical throughput.
    pub optics_efficiency: f64,
    pub atmosphere: AtmosphereModel,
}

impl Default for LinkParameters {
    fn default() -> Self {
        Self {
            receiver_diameter: 1.0,
            jitter_sigma: 3.0,
            optics_efficiency: 0.5,
            atmosphere: AtmosphereModel::default(),
        }
    }
}

impl LinkParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.receiver_diameter > 0.0) {
            return Err(ModelError::invalid("receiver_diameter", "must be positive"));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(ModelError::invalid("jitter_sigma", "must be non-negative"));
        }
        if !(self.optics_efficiency > 0.0 && self.optics_efficiency <= 1.0) {
            return Err(ModelError::invalid("optics_efficiency", "must lie in (0, 1]"));
        }
        self.atmosphere.validate()
    }
}

pub fn link_budget(source: &OpticalSourceGeometry, point: &TopoPoint, params: &LinkParameters) -> Result<LinkBudget> {
    source.validate()?;
    params.validate()?;
    if !(point.slant_range > 0.0) {
        return Err(ModelError::invalid("slant_range", "must be positive"));
    }
    let spot = ground_spot(source, point.slant_range);
    let geometric = if params.receiver_diameter >= spot {
        0.0
    } else {
        to_db(capture_fraction(beam_radius(source, point.slant_range), params.receiver_diameter))
    };
    let pointing = pointing_loss(params.jitter_sigma, source.beam_half_angle())?;
    let atmospheric = to_db(params.atmosphere.transmittance(point.elevation, source.wavelength_nm)?);
    let optics = to_db(params.optics_efficiency);
    // Clamp −0.0 so every entry is a genuine non-positive number.
    let [geometric, pointing, atmospheric, optics] = [geometric, pointing, atmospheric, optics].map(|x| x.min(0.0) + 0.0);
    Ok(LinkBudget {
        diffraction_geometric_loss: geometric,
        pointing_loss: pointing,
        atmospheric_loss: atmospheric,
        optics_efficiency_loss: optics,
        total: geometric + pointing + atmospheric + optics,
        ground_spot_diameter: spot,
        slant_range: point.slant_range,
    })
}

/// Geometry-only point at `elevation_deg` for a spacecraft at `altitude_m`.
pub fn nominal_point(elevation_deg: f64, altitude_m: f64) -> TopoPoint {
    TopoPoint {
        epoch: 0.0,
        elevation: elevation_deg,
        azimuth: 0.0,
        slant_range: slant_range_at_elevation(elevation_deg, altitude_m, EARTH_MEAN_RADIUS),
        range_rate: 0.0,
        transverse_velocity: 0.0,
        in_eclipse: true,
    }
}

/// Budget at each elevation for a spacecraft at `altitude_m`.
pub fn elevation_sweep(
    source: &OpticalSourceGeometry,
    altitude_m: f64,
    params: &LinkParameters,
    elevations_deg: &[f64],
) -> Result<Vec<(f64, LinkBudget)>> {
    elevations_deg
        .iter()
        .map(|&e| link_budget(source, &nominal_point(e, altitude_m), params).map(|b| (e, b)))
        .collect()
}
