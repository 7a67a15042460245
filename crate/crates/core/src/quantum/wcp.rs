use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{Basis, PS_PER_S};
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intensity {
    Signal,
    Decoy,
    Vacuum,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Signal, Intensity::Decoy, Intensity::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcpSourceConfig {
    /// Pulses per second.
    pub pulse_rate: f64,
    /// Mean photon number µ of signal pulses.
    pub mean_photons_signal: f64,
    /// Mean photon number ν of decoy pulses.
    pub mean_photons_decoy: f64,
    pub signal_fraction: f64,
    pub decoy_fraction: f64,
    pub vacuum_fraction: f64,
}

impl Default for WcpSourceConfig {
    fn default() -> Self {
        Self {
            pulse_rate: 100e6,
            mean_photons_signal: 0.5,
            mean_photons_decoy: 0.1,
            signal_fraction: 0.6,
            decoy_fraction: 0.3,
            vacuum_fraction: 0.1,
        }
    }
}

impl WcpSourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_rate > 0.0 && self.pulse_rate <= PS_PER_S) {
            return Err(ModelError::invalid("pulse_rate", "must lie in (0, 1e12] Hz"));
        }
        if !(self.mean_photons_decoy >= 0.0 && self.mean_photons_decoy < self.mean_photons_signal) {
            return Err(ModelError::invalid("mean_photons_decoy", "must satisfy 0 ≤ ν < µ"));
        }
        if !self.mean_photons_signal.is_finite() {
            return Err(ModelError::invalid("mean_photons_signal", "must be finite"));
        }
        let fractions = self.fractions();
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(ModelError::invalid("signal_fraction", "intensity fractions must lie in [0, 1]"));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ModelError::invalid("signal_fraction", "intensity fractions must sum to 1"));
        }
        Ok(())
    }

    /// Indexed by [`Intensity::index`].
    pub fn fractions(&self) -> [f64; 3] {
        [self.signal_fraction, self.decoy_fraction, self.vacuum_fraction]
    }

    /// Indexed by [`Intensity::index`].
    pub fn means(&self) -> [f64; 3] {
        [self.mean_photons_signal, self.mean_photons_decoy, 0.0]
    }

    pub fn mean(&self, class: Intensity) -> f64 {
        self.means()[class.index()]
    }

    /// Slot spacing in whole picoseconds.
    pub fn period_ps(&self) -> i64 {
        (PS_PER_S / self.pulse_rate).round() as i64
    }

    pub(crate) fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> Intensity {
        let u: f64 = rng.random();
        if u < self.signal_fraction {
            Intensity::Signal
        } else if u < self.signal_fraction + self.decoy_fraction {
            Intensity::Decoy
        } else {
            Intensity::Vacuum
        }
    }
}

/// Number of pulse slots in `duration` seconds.
pub fn pulse_count(config: &WcpSourceConfig, duration: f64) -> u64 {
    (config.pulse_rate * duration).floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pulse {
    pub slot: u64,
    pub intensity: Intensity,
    pub basis: Basis,
    pub bit: bool,
    /// Photons actually emitted; simulation truth only.
    pub photons: u32,
}

/// Lazily generated pulse train.
#[derive(Debug, Clone)]
pub struct WcpEmitter {
    config: WcpSourceConfig,
    count: u64,
    next: u64,
    rng: ChaCha8Rng,
    poisson: [Option<Poisson<f64>>; 3],
}

impl WcpEmitter {
    pub fn config(&self) -> &WcpSourceConfig {
        &self.config
    }

    pub fn total_pulses(&self) -> u64 {
        self.count
    }
}

impl Iterator for WcpEmitter {
    type Item = Pulse;

    fn next(&mut self) -> Option<Pulse> {
        if self.next >= self.count {
            return None;
        }
        let slot = self.next;
        self.next += 1;
        let intensity = self.config.draw_class(&mut self.rng);
        let basis = Basis::random(&mut self.rng);
        let bit = self.rng.random();
        let photons = self.poisson[intensity.index()]
            .as_ref()
            .map_or(0, |p| p.sample(&mut self.rng) as u32);
        Some(Pulse {
            slot,
            intensity,
            basis,
            bit,
            photons,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

pub fn emit_wcp(config: &WcpSourceConfig, duration: f64, seed: u64) -> Result<WcpEmitter> {
    config.validate()?;
    if !(duration > 0.0) {
        return Err(ModelError::invalid("duration", "must be positive"));
    }
    let poisson = config.means().map(|m| (m > 0.0).then(|| Poisson::new(m).expect("positive mean")));
    Ok(WcpEmitter {
        config: *config,
        count: pulse_count(config, duration),
        next: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
        poisson,
    })
}

/// What the sender announces for one slot: class, basis and bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentEntry {
    pub slot: u64,
    pub intensity: Intensity,
    pub basis: Basis,
    pub bit: bool,
}

/// Sender records for the slots the receiver may report, plus per-class
/// pulse totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentLog {
    pub period_ps: i64,
    /// Sorted by slot, unique.
    pub entries: Vec<SentEntry>,
    /// Indexed by [`Intensity::index`].
    pub sent_per_class: [u64; 3],
}

impl SentLog {
    pub fn total_sent(&self) -> u64 {
        self.sent_per_class.iter().sum()
    }

    pub fn find(&self, slot: u64) -> Option<&SentEntry> {
        self.entries.binary_search_by_key(&slot, |e| e.slot).ok().map(|i| &self.entries[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_mean_photon_number() {
        let cfg = WcpSourceConfig {
            signal_fraction: 1.0,
            decoy_fraction: 0.0,
            vacuum_fraction: 0.0,
            ..WcpSourceConfig::default()
        };
        let pulses = emit_wcp(&cfg, 1e6 / cfg.pulse_rate, 1).unwrap();
        assert_eq!(pulses.total_pulses(), 1_000_000);
        let sum: u64 = pulses.map(|p| p.photons as u64).sum();
        let mean = sum as f64 / 1e6;
        assert!((mean - 0.5).abs() < 0.003, "{mean}");
    }

    #[test]
    fn vacuum_pulses_are_empty_and_classes_follow_fractions() {
        let cfg = WcpSourceConfig::default();
        let mut counts = [0u64; 3];
        for p in emit_wcp(&cfg, 1e-3, 2).unwrap() {
            counts[p.intensity.index()] += 1;
            if p.intensity == Intensity::Vacuum {
                assert_eq!(p.photons, 0);
            }
        }
        let n = counts.iter().sum::<u64>() as f64;
        for (c, f) in counts.iter().zip(cfg.fractions()) {
            assert!((*c as f64 / n - f).abs() < 0.005);
        }
    }

    #[test]
    fn pass_scale_count_is_not_materialised() {
        let emitter = emit_wcp(&WcpSourceConfig::default(), 400.0, 0).unwrap();
        assert_eq!(emitter.total_pulses(), 40_000_000_000);
    }

    #[test]
    fn deterministic_stream() {
        let a: Vec<Pulse> = emit_wcp(&WcpSourceConfig::default(), 1e-5, 5).unwrap().collect();
        let b: Vec<Pulse> = emit_wcp(&WcpSourceConfig::default(), 1e-5, 5).unwrap().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_fractions_rejected() {
        let cfg = WcpSourceConfig {
            vacuum_fraction: 0.2,
            ..WcpSourceConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = WcpSourceConfig {
            mean_photons_decoy: 0.6,
            ..WcpSourceConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
