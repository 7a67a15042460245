//! Asymptotic vacuum + weak-decoy analysis.
//!
//! With signal intensity µ, decoy ν < µ and vacuum gain Y0:
//!
//! ```text
//! Y1 ≥ µ/(µν − ν²) · [Q_ν e^ν − Q_µ e^µ ν²/µ² − (µ² − ν²)/µ² · Y0]
//! e1 ≤ (E_ν Q_ν e^ν − Y0/2) / (Y1 ν)
//! Q1 = Y1 µ e^−µ
//! R  = Q1 (1 − h2(e1)) − Q_µ f_EC h2(E_µ)
//! ```

use serde::Serialize;

use super::wcp::WcpSourceConfig;
use super::{DetectorConfig, PS_PER_S};

pub const ERROR_CORRECTION_EFFICIENCY: f64 = 1.16;

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Measured per-intensity gains and error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyInputs {
    pub mu: f64,
    pub nu: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q_nu: f64,
    pub e_nu: f64,
    pub q_vac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1_lower: f64,
    /// Secure bits per signal pulse before sifting, clamped at zero.
    pub key_fraction: f64,
    pub valid: bool,
}

impl DecoyBounds {
    pub fn invalid() -> Self {
        Self {
            y1_lower: 0.0,
            e1_upper: 0.5,
            q1_lower: 0.0,
            key_fraction: 0.0,
            valid: false,
        }
    }
}

pub fn decoy_key_rate(input: &DecoyInputs) -> DecoyBounds {
    let DecoyInputs {
        mu,
        nu,
        q_mu,
        e_mu,
        q_nu,
        e_nu,
        q_vac: y0,
    } = *input;
    let gains_ok = q_mu > 0.0 && q_mu < 1.0 && q_nu > 0.0 && q_nu < 1.0 && (0.0..1.0).contains(&y0);
    let rates_ok = (0.0..=1.0).contains(&e_mu) && (0.0..=1.0).contains(&e_nu);
    if !(gains_ok && rates_ok && nu > 0.0 && nu < mu) {
        return DecoyBounds::invalid();
    }
    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp() - q_mu * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0);
    if !(y1 > 0.0 && y1.is_finite()) {
        return DecoyBounds {
            y1_lower: y1,
            ..DecoyBounds::invalid()
        };
    }
    let e1 = (e_nu * q_nu * nu.exp() - 0.5 * y0) / (y1 * nu);
    let q1 = y1 * mu * (-mu).exp();
    if !(e1 >= 0.0 && e1.is_finite()) {
        return DecoyBounds {
            y1_lower: y1,
            e1_upper: e1,
            q1_lower: q1,
            key_fraction: 0.0,
            valid: false,
        };
    }
    let privacy = if e1 < 0.5 { 1.0 - binary_entropy(e1) } else { 0.0 };
    let rate = q1 * privacy - q_mu * ERROR_CORRECTION_EFFICIENCY * binary_entropy(e_mu);
    DecoyBounds {
        y1_lower: y1,
        e1_upper: e1,
        q1_lower: q1,
        key_fraction: rate.max(0.0),
        valid: true,
    }
}

/// Expected gains and error rates for per-photon detection probability `eta`,
/// ignoring dead time. Noise clicks land in a slot with probability
/// 1 − exp(−R·2w).
pub fn expected_wcp_statistics(config: &WcpSourceConfig, eta: f64, detector: &DetectorConfig, window_ps: i64) -> DecoyInputs {
    let y0 = -(-detector.noise_rate() * 2.0 * window_ps as f64 / PS_PER_S).exp_m1();
    let gain = |m: f64| 1.0 - (1.0 - y0) * (-m * eta).exp();
    let error = |m: f64| {
        let q = gain(m);
        if q > 0.0 {
            (0.5 * y0 + detector.misalignment_error * -(-m * eta).exp_m1()) / q
        } else {
            0.0
        }
    };
    DecoyInputs {
        mu: config.mean_photons_signal,
        nu: config.mean_photons_decoy,
        q_mu: gain(config.mean_photons_signal),
        e_mu: error(config.mean_photons_signal),
        q_nu: gain(config.mean_photons_decoy),
        e_nu: error(config.mean_photons_decoy),
        q_vac: y0,
    }
}

/// Expected receiver click rate before dead time, s⁻¹.
pub fn expected_click_rate(config: &WcpSourceConfig, eta: f64, detector: &DetectorConfig) -> f64 {
    let per_pulse: f64 = config
        .fractions()
        .iter()
        .zip(config.means())
        .map(|(f, m)| f * -(-m * eta).exp_m1())
        .sum();
    config.pulse_rate * per_pulse + detector.noise_rate()
}
