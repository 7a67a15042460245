use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::{
    dead_time_filter, noise_clicks, split_truth, Basis, Detection, DetectionRecord, DetectorConfig, Jitter, Origin,
    RawClick, PS_PER_S,
};
use super::decoy::{binary_entropy, ERROR_CORRECTION_EFFICIENCY};
use crate::error::{ModelError, Result};
use crate::link::LinkBudget;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntangledSourceConfig {
    /// Generated pairs per second.
    pub pair_rate: f64,
    /// Probability the retained photon is detected on board.
    pub heralding_efficiency_local: f64,
    /// Same-basis polarisation contrast.
    pub intrinsic_visibility: f64,
    /// On-board detector jitter, s.
    pub timing_jitter_sigma: f64,
}

impl Default for EntangledSourceConfig {
    fn default() -> Self {
        Self {
            pair_rate: 5e6,
            heralding_efficiency_local: 0.4,
            intrinsic_visibility: 0.94,
            timing_jitter_sigma: 0.3e-9,
        }
    }
}

impl EntangledSourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate > 0.0 && self.pair_rate.is_finite()) {
            return Err(ModelError::invalid("pair_rate", "must be positive"));
        }
        if !(self.heralding_efficiency_local > 0.0 && self.heralding_efficiency_local <= 1.0) {
            return Err(ModelError::invalid("heralding_efficiency_local", "must lie in (0, 1]"));
        }
        if !(self.intrinsic_visibility > 0.7 && self.intrinsic_visibility <= 1.0) {
            return Err(ModelError::invalid("intrinsic_visibility", "must lie in (0.7, 1]"));
        }
        if !(self.timing_jitter_sigma >= 0.0 && self.timing_jitter_sigma.is_finite()) {
            return Err(ModelError::invalid("timing_jitter_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Probability that same-basis outcomes disagree.
    pub fn intrinsic_error(&self) -> f64 {
        0.5 * (1.0 - self.intrinsic_visibility)
    }
}

/// One pair with both measurement settings and outcomes. Outcomes agree in a
/// shared basis with probability (1 + V)/2 and are independent otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub time_ps: i64,
    pub local_basis: Basis,
    pub local_bit: bool,
    pub remote_basis: Basis,
    pub remote_bit: bool,
}

#[derive(Debug, Clone)]
pub struct EntangledEmitter {
    config: EntangledSourceConfig,
    end_ps: f64,
    clock_ps: f64,
    gap: Exp<f64>,
    rng: ChaCha8Rng,
}

impl EntangledEmitter {
    pub fn config(&self) -> &EntangledSourceConfig {
        &self.config
    }

    pub fn duration_ps(&self) -> i64 {
        self.end_ps as i64
    }
}

impl Iterator for EntangledEmitter {
    type Item = Pair;

    fn next(&mut self) -> Option<Pair> {
        self.clock_ps += self.gap.sample(&mut self.rng);
        if self.clock_ps >= self.end_ps {
            return None;
        }
        let local_basis = Basis::random(&mut self.rng);
        let local_bit: bool = self.rng.random();
        let remote_basis = Basis::random(&mut self.rng);
        let remote_bit = if remote_basis == local_basis {
            local_bit ^ self.rng.random_bool(self.config.intrinsic_error())
        } else {
            self.rng.random()
        };
        Some(Pair {
            time_ps: self.clock_ps as i64,
            local_basis,
            local_bit,
            remote_basis,
            remote_bit,
        })
    }
}

/// Poisson pair stream over `duration` seconds, generated lazily.
pub fn emit_entangled(config: &EntangledSourceConfig, duration: f64, seed: u64) -> Result<EntangledEmitter> {
    config.validate()?;
    if !(duration > 0.0) {
        return Err(ModelError::invalid("duration", "must be positive"));
    }
    Ok(EntangledEmitter {
        config: *config,
        end_ps: duration * PS_PER_S,
        clock_ps: 0.0,
        gap: Exp::new(config.pair_rate / PS_PER_S).expect("positive rate"),
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

/// On-board and ground detections of one pair stream. Ground timestamps run
/// on a clock offset by `clock_offset_ps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntangledRun {
    pub local: DetectionRecord,
    pub remote: DetectionRecord,
    pub local_origins: Vec<Origin>,
    pub remote_origins: Vec<Origin>,
    /// Pair index behind each signal detection; simulation truth.
    pub local_pairs: Vec<Option<usize>>,
    pub remote_pairs: Vec<Option<usize>>,
    pub pairs_emitted: u64,
}

impl EntangledRun {
    /// Pairs detected at both ends (truth channel).
    pub fn true_coincidences(&self) -> u64 {
        let mut local: Vec<usize> = self.local_pairs.iter().flatten().copied().collect();
        local.sort_unstable();
        self.remote_pairs
            .iter()
            .flatten()
            .filter(|p| local.binary_search(p).is_ok())
            .count() as u64
    }
}

/// Detect both halves of each pair. The ground half survives with the link
/// transmission times detector efficiency. The visibility is the end-to-end
/// contrast, so no extra misalignment flip is applied.
pub fn detect_pairs(
    source: EntangledEmitter,
    link: &LinkBudget,
    local_detector: &DetectorConfig,
    remote_detector: &DetectorConfig,
    clock_offset_ps: i64,
    seed: u64,
) -> Result<EntangledRun> {
    local_detector.validate()?;
    remote_detector.validate()?;
    if !(link.total.is_finite() && link.total <= 0.0) {
        return Err(ModelError::invalid("link.total", "must be finite and non-positive"));
    }
    let eta_remote = link.transmission() * remote_detector.efficiency;
    let eta_local = source.config().heralding_efficiency_local;
    let duration_ps = source.duration_ps();
    let local_jitter = Jitter::new(source.config().timing_jitter_sigma);
    let remote_jitter = Jitter::new(remote_detector.jitter_sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut local = noise_clicks(local_detector, duration_ps, &mut rng);
    let mut remote = noise_clicks(remote_detector, duration_ps, &mut rng);
    for c in &mut remote {
        c.detection.time_ps += clock_offset_ps;
    }
    let mut emitted = 0u64;
    for (i, pair) in source.enumerate() {
        emitted += 1;
        if rng.random_bool(eta_local) {
            local.push(RawClick {
                detection: Detection {
                    time_ps: pair.time_ps + local_jitter.sample(&mut rng),
                    basis: pair.local_basis,
                    bit: pair.local_bit,
                },
                origin: Origin::Signal,
                source: Some(i),
            });
        }
        if rng.random_bool(eta_remote) {
            remote.push(RawClick {
                detection: Detection {
                    time_ps: pair.time_ps + clock_offset_ps + remote_jitter.sample(&mut rng),
                    basis: pair.remote_basis,
                    bit: pair.remote_bit,
                },
                origin: Origin::Signal,
                source: Some(i),
            });
        }
    }
    let (local, local_origins, local_pairs) = split_truth(dead_time_filter(local, local_detector.dead_time_ps()));
    let (remote, remote_origins, remote_pairs) = split_truth(dead_time_filter(remote, remote_detector.dead_time_ps()));
    Ok(EntangledRun {
        local,
        remote,
        local_origins,
        remote_origins,
        local_pairs,
        remote_pairs,
        pairs_emitted: emitted,
    })
}

/// Steady-state coincidence statistics for a fixed link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntangledExpectation {
    pub local_rate: f64,
    pub remote_rate: f64,
    /// True pairs found inside the coincidence window, s⁻¹.
    pub coincidence_rate: f64,
    pub accidental_rate: f64,
    pub qber: f64,
    /// Secure bits per sifted coincidence, clamped at zero.
    pub key_fraction: f64,
}

/// Expected rates and error for per-photon ground detection probability
/// `eta_remote` and coincidence half-window `window_ps`, ignoring dead time.
pub fn expected_entangled_statistics(
    config: &EntangledSourceConfig,
    eta_remote: f64,
    local_detector: &DetectorConfig,
    remote_detector: &DetectorConfig,
    window_ps: i64,
) -> EntangledExpectation {
    let w = window_ps as f64 / PS_PER_S;
    let local_signal = config.pair_rate * config.heralding_efficiency_local;
    let local_rate = local_signal + local_detector.noise_rate();
    let remote_rate = config.pair_rate * eta_remote + remote_detector.noise_rate();
    let sigma = config.timing_jitter_sigma.hypot(remote_detector.jitter_sigma);
    let captured = if sigma > 0.0 { erf(w / (std::f64::consts::SQRT_2 * sigma)) } else { 1.0 };
    let coincidence_rate = local_signal * eta_remote * captured;
    let accidental_rate = local_rate * remote_rate * 2.0 * w;
    let total = coincidence_rate + accidental_rate;
    let qber = if total > 0.0 {
        (config.intrinsic_error() * coincidence_rate + 0.5 * accidental_rate) / total
    } else {
        0.5
    };
    EntangledExpectation {
        local_rate,
        remote_rate,
        coincidence_rate,
        accidental_rate,
        qber,
        key_fraction: (1.0 - (1.0 + ERROR_CORRECTION_EFFICIENCY) * binary_entropy(qber)).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same_basis_qber(visibility: f64, pairs: usize, seed: u64) -> f64 {
        let cfg = EntangledSourceConfig {
            intrinsic_visibility: visibility,
            ..EntangledSourceConfig::default()
        };
        let (mut n, mut err) = (0u64, 0u64);
        for p in emit_entangled(&cfg, 1.0, seed).unwrap().take(pairs) {
            if p.local_basis == p.remote_basis {
                n += 1;
                err += u64::from(p.local_bit != p.remote_bit);
            }
        }
        err as f64 / n as f64
    }

    #[test]
    fn ideal_pairs_agree() {
        assert_eq!(same_basis_qber(1.0, 100_000, 1), 0.0);
    }

    #[test]
    fn mixture_error_rate() {
        for v in [0.9, 0.94] {
            let q = same_basis_qber(v, 100_000, 2);
            assert!((q - (1.0 - v) / 2.0).abs() < 0.005, "{v}: {q}");
        }
    }

    #[test]
    fn pair_rate_and_order() {
        let cfg = EntangledSourceConfig::default();
        let times: Vec<i64> = emit_entangled(&cfg, 0.01, 3).unwrap().map(|p| p.time_ps).collect();
        let n = times.len() as f64;
        assert!((n - 5e4).abs() < 5.0 * 5e4f64.sqrt());
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn expectation_matches_simulation() {
        let cfg = EntangledSourceConfig::default();
        let local = DetectorConfig {
            background_rate: 0.0,
            ..DetectorConfig::default()
        };
        let remote = DetectorConfig::default();
        let eta = 10f64.powf(-3.0) * remote.efficiency;
        let expected = expected_entangled_statistics(&cfg, eta, &local, &remote, 1_000);
        let run = detect_pairs(emit_entangled(&cfg, 1.0, 5).unwrap(), &crate::link::LinkBudget {
            diffraction_geometric_loss: -30.0,
            pointing_loss: 0.0,
            atmospheric_loss: 0.0,
            optics_efficiency_loss: 0.0,
            total: -30.0,
            ground_spot_diameter: 1.0,
            slant_range: 5e5,
        }, &local, &remote, 0, 6)
        .unwrap();
        let report = super::super::coincidence_qber(&run.local, &run.remote, 0, 1_000);
        let c = report.coincidences as f64;
        let e = expected.coincidence_rate + expected.accidental_rate;
        assert!((c - e).abs() < 5.0 * e.sqrt(), "{c} vs {e}");
        assert!((report.qber.unwrap() - expected.qber).abs() < 0.01);
    }

    #[test]
    fn visibility_range_enforced() {
        let cfg = EntangledSourceConfig {
            intrinsic_visibility: 0.6,
            ..EntangledSourceConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
