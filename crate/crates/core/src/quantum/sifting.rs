use serde::Serialize;

use super::decoy::{decoy_key_rate, DecoyBounds, DecoyInputs};
use super::wcp::{Intensity, SentLog, WcpSourceConfig};
use super::DetectionRecord;

/// Slot whose centre lies within `window_ps` of `time_ps`.
pub(crate) fn paired_slot(time_ps: i64, period_ps: i64, window_ps: i64) -> Option<u64> {
    if time_ps < -window_ps {
        return None;
    }
    let slot = (time_ps + period_ps / 2).div_euclid(period_ps);
    ((time_ps - slot * period_ps).abs() <= window_ps && slot >= 0).then_some(slot as u64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub sent: u64,
    /// Detections paired with a pulse of this class, either basis.
    pub detected: u64,
    pub sifted: u64,
    pub errors: u64,
}

impl ClassCounts {
    pub fn gain(&self) -> f64 {
        self.detected as f64 / self.sent.max(1) as f64
    }

    pub fn error_rate(&self) -> Option<f64> {
        (self.sifted > 0).then(|| self.errors as f64 / self.sifted as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SiftResult {
    /// Indexed by [`Intensity::index`].
    pub per_class: [ClassCounts; 3],
    pub detections: u64,
    pub paired: u64,
    pub sifted_bits: u64,
    pub errors: u64,
    /// Undefined when nothing survives sifting.
    pub qber: Option<f64>,
}

impl SiftResult {
    pub fn class(&self, intensity: Intensity) -> &ClassCounts {
        &self.per_class[intensity.index()]
    }

    /// Sifted over paired detections.
    pub fn sifting_fraction(&self) -> f64 {
        self.sifted_bits as f64 / self.paired.max(1) as f64
    }
}

/// Pair each detection with the announced slot inside `window_ps` and keep
/// matching bases.
pub fn sift_bb84(sent: &SentLog, received: &DetectionRecord, window_ps: i64) -> SiftResult {
    let mut out = SiftResult {
        detections: received.len() as u64,
        ..SiftResult::default()
    };
    for (c, counts) in out.per_class.iter_mut().enumerate() {
        counts.sent = sent.sent_per_class[c];
    }
    for d in &received.events {
        let Some(entry) = paired_slot(d.time_ps, sent.period_ps, window_ps).and_then(|s| sent.find(s)) else {
            continue;
        };
        out.paired += 1;
        let counts = &mut out.per_class[entry.intensity.index()];
        counts.detected += 1;
        if entry.basis == d.basis {
            counts.sifted += 1;
            out.sifted_bits += 1;
            if entry.bit != d.bit {
                counts.errors += 1;
                out.errors += 1;
            }
        }
    }
    out.qber = (out.sifted_bits > 0).then(|| out.errors as f64 / out.sifted_bits as f64);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyReport {
    pub sent_pulses: u64,
    pub sifted_bits: u64,
    pub qber: Option<f64>,
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// Asymptotic secure bits, clamped at zero.
    pub secure_key_length: f64,
    /// Set when the decoy bounds are inconsistent or the sift is empty.
    pub bounds_invalid: bool,
}

impl KeyReport {
    pub fn from_bounds(sent_pulses: u64, signal_pulses: f64, sifted_bits: u64, qber: Option<f64>, bounds: &DecoyBounds) -> Self {
        Self {
            sent_pulses,
            sifted_bits,
            qber,
            y1_lower: bounds.y1_lower,
            e1_upper: bounds.e1_upper,
            secure_key_length: 0.5 * signal_pulses * bounds.key_fraction,
            bounds_invalid: !bounds.valid,
        }
    }
}

/// Decoy analysis of a sifted run. The key is drawn from signal-class pulses.
pub fn key_report(config: &WcpSourceConfig, sift: &SiftResult) -> KeyReport {
    let s = sift.class(Intensity::Signal);
    let d = sift.class(Intensity::Decoy);
    let v = sift.class(Intensity::Vacuum);
    let bounds = match (s.error_rate(), d.error_rate()) {
        (Some(e_mu), Some(e_nu)) if sift.qber.is_some() => decoy_key_rate(&DecoyInputs {
            mu: config.mean_photons_signal,
            nu: config.mean_photons_decoy,
            q_mu: s.gain(),
            e_mu,
            q_nu: d.gain(),
            e_nu,
            q_vac: v.gain(),
        }),
        _ => DecoyBounds::invalid(),
    };
    KeyReport::from_bounds(
        sift.per_class.iter().map(|c| c.sent).sum(),
        s.sent as f64,
        sift.sifted_bits,
        sift.qber,
        &bounds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_pairing() {
        assert_eq!(paired_slot(0, 10_000, 1_000), Some(0));
        assert_eq!(paired_slot(10_900, 10_000, 1_000), Some(1));
        assert_eq!(paired_slot(15_000, 10_000, 1_000), None);
        assert_eq!(paired_slot(-900, 10_000, 1_000), Some(0));
        assert_eq!(paired_slot(-5_000, 10_000, 1_000), None);
    }

    #[test]
    fn empty_sift_is_flagged() {
        let sift = sift_bb84(&SentLog::default_with_period(10_000), &DetectionRecord::default(), 1_000);
        assert_eq!(sift.qber, None);
        let report = key_report(&WcpSourceConfig::default(), &sift);
        assert!(report.bounds_invalid);
        assert_eq!(report.secure_key_length, 0.0);
    }

    impl SentLog {
        fn default_with_period(period_ps: i64) -> Self {
            Self {
                period_ps,
                ..Self::default()
            }
        }
    }
}
