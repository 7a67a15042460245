//! Photon-level QKD: weak-coherent-pulse decoy BB84 and entangled-pair
//! downlinks, detector models, sifting, decoy bounds and clockless
//! coincidence matching.
//!
//! Timestamps are integer picoseconds on the receiving clock.

mod channel;
mod coincidence;
mod decoy;
mod entangled;
mod sifting;
mod wcp;

pub use channel::{apply_channel, simulate_wcp_aggregate, SimulationTruth, WcpRun};
pub use coincidence::{coincidence_qber, match_offset, CoincidenceReport, OffsetEstimate, MIN_LOCK_SIGNIFICANCE};
pub use decoy::{binary_entropy, decoy_key_rate, expected_click_rate, expected_wcp_statistics, DecoyBounds, DecoyInputs, ERROR_CORRECTION_EFFICIENCY};
pub use entangled::{
    detect_pairs, emit_entangled, expected_entangled_statistics, EntangledEmitter, EntangledExpectation, EntangledRun,
    EntangledSourceConfig, Pair,
};
pub use sifting::{key_report, sift_bb84, ClassCounts, KeyReport, SiftResult};
pub use wcp::{emit_wcp, pulse_count, Intensity, Pulse, SentEntry, SentLog, WcpEmitter, WcpSourceConfig};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

pub const PS_PER_S: f64 = 1e12;

/// Default half-width of the pulse-slot pairing window, ps.
pub const DEFAULT_PAIRING_WINDOW_PS: i64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// H/V.
    Rectilinear,
    /// D/A.
    Diagonal,
}

impl Basis {
    pub(crate) fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Photon detection probability.
    pub efficiency: f64,
    /// Counts per second.
    pub dark_rate: f64,
    /// Stray-light counts per second.
    pub background_rate: f64,
    /// Non-paralysable dead time, s.
    pub dead_time: f64,
    /// 1σ timing jitter, s.
    pub jitter_sigma: f64,
    /// Residual polarisation-frame error probability in a matching basis.
    pub misalignment_error: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            dark_rate: 100.0,
            background_rate: 500.0,
            dead_time: 50e-9,
            jitter_sigma: 0.3e-9,
            misalignment_error: 0.02,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(ModelError::invalid("efficiency", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("dark_rate", self.dark_rate),
            ("background_rate", self.background_rate),
            ("dead_time", self.dead_time),
            ("jitter_sigma", self.jitter_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::invalid(name, "must be finite and non-negative"));
            }
        }
        if !(0.0..=0.5).contains(&self.misalignment_error) {
            return Err(ModelError::invalid("misalignment_error", "must lie in [0, 0.5]"));
        }
        Ok(())
    }

    pub fn noise_rate(&self) -> f64 {
        self.dark_rate + self.background_rate
    }

    fn dead_time_ps(&self) -> i64 {
        (self.dead_time * PS_PER_S).round() as i64
    }
}

/// One receiver click as seen by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub time_ps: i64,
    pub basis: Basis,
    pub bit: bool,
}

/// Receiver-side detections, strictly increasing in time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub events: Vec<Detection>,
}

impl DetectionRecord {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = i64> + '_ {
        self.events.iter().map(|e| e.time_ps)
    }

    /// Same events with every timestamp moved by `delta_ps`.
    pub fn shifted(&self, delta_ps: i64) -> Self {
        Self {
            events: self
                .events
                .iter()
                .map(|e| Detection {
                    time_ps: e.time_ps + delta_ps,
                    ..*e
                })
                .collect(),
        }
    }
}

/// Where a click came from. Lives only in the simulation-truth channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Signal,
    Dark,
    Background,
}

/// A click before dead-time filtering, with its truth tag.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawClick {
    pub detection: Detection,
    pub origin: Origin,
    /// Index into the sender's log for signal clicks.
    pub source: Option<usize>,
}

/// Poisson-in-time dark and background clicks over `[0, duration_ps)`, sorted.
pub(crate) fn noise_clicks<R: Rng + ?Sized>(detector: &DetectorConfig, duration_ps: i64, rng: &mut R) -> Vec<RawClick> {
    let duration_s = duration_ps as f64 / PS_PER_S;
    let mut clicks = Vec::new();
    for (rate, origin) in [(detector.dark_rate, Origin::Dark), (detector.background_rate, Origin::Background)] {
        let mean = rate * duration_s;
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
        for _ in 0..n {
            clicks.push(RawClick {
                detection: Detection {
                    time_ps: rng.random_range(0..duration_ps.max(1)),
                    basis: Basis::random(rng),
                    bit: rng.random(),
                },
                origin,
                source: None,
            });
        }
    }
    clicks.sort_by_key(|c| c.detection.time_ps);
    clicks
}

/// Gaussian timing jitter in whole picoseconds.
pub(crate) struct Jitter(Option<Normal<f64>>);

impl Jitter {
    pub(crate) fn new(sigma_s: f64) -> Self {
        Self((sigma_s > 0.0).then(|| Normal::new(0.0, sigma_s * PS_PER_S).expect("finite jitter")))
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.0.as_ref().map_or(0, |n| n.sample(rng).round() as i64)
    }
}

/// Sort, then drop clicks within the dead time of the last retained one.
/// Equal timestamps are merged the same way, so output times strictly increase.
pub(crate) fn dead_time_filter(mut clicks: Vec<RawClick>, dead_time_ps: i64) -> Vec<RawClick> {
    clicks.sort_by_key(|c| c.detection.time_ps);
    let mut kept: Vec<RawClick> = Vec::with_capacity(clicks.len());
    for c in clicks {
        match kept.last() {
            Some(last) if c.detection.time_ps - last.detection.time_ps < dead_time_ps.max(1) => {}
            _ => kept.push(c),
        }
    }
    kept
}

/// Split filtered clicks into the protocol record and truth tags.
pub(crate) fn split_truth(clicks: Vec<RawClick>) -> (DetectionRecord, Vec<Origin>, Vec<Option<usize>>) {
    let mut events = Vec::with_capacity(clicks.len());
    let mut origins = Vec::with_capacity(clicks.len());
    let mut sources = Vec::with_capacity(clicks.len());
    for c in clicks {
        events.push(c.detection);
        origins.push(c.origin);
        sources.push(c.source);
    }
    (DetectionRecord { events }, origins, sources)
}
