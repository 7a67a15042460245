use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use super::sifting::paired_slot;
use super::wcp::{Intensity, SentEntry, SentLog, WcpEmitter, WcpSourceConfig};
use super::{
    dead_time_filter, noise_clicks, split_truth, Basis, Detection, DetectionRecord, DetectorConfig, Jitter, Origin,
    RawClick,
};
use crate::error::{ModelError, Result};
use crate::link::LinkBudget;

/// Ground truth kept apart from the protocol records.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimulationTruth {
    /// Origin of each retained detection.
    pub origins: Vec<Origin>,
    /// Photons emitted in each logged slot, parallel to `SentLog::entries`.
    pub photons: Vec<u32>,
    /// Pulses carrying exactly one photon, all classes.
    pub single_photon_sent: u64,
    /// Per-photon detection probability (channel × detector efficiency).
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WcpRun {
    pub sent: SentLog,
    pub record: DetectionRecord,
    pub truth: SimulationTruth,
}

impl WcpRun {
    /// Empirical single-photon yield and error rate from the truth channel.
    pub fn true_single_photon(&self, window_ps: i64) -> (f64, f64) {
        let (mut detected, mut sifted, mut errors) = (0u64, 0u64, 0u64);
        for d in &self.record.events {
            let Some(slot) = paired_slot(d.time_ps, self.sent.period_ps, window_ps) else {
                continue;
            };
            let Ok(i) = self.sent.entries.binary_search_by_key(&slot, |e| e.slot) else {
                continue;
            };
            if self.truth.photons[i] != 1 {
                continue;
            }
            detected += 1;
            let e = &self.sent.entries[i];
            if e.basis == d.basis {
                sifted += 1;
                errors += u64::from(e.bit != d.bit);
            }
        }
        let y1 = detected as f64 / self.truth.single_photon_sent.max(1) as f64;
        let e1 = if sifted > 0 { errors as f64 / sifted as f64 } else { f64::NAN };
        (y1, e1)
    }
}

fn transmission(link: &LinkBudget, detector: &DetectorConfig) -> Result<f64> {
    detector.validate()?;
    if !(link.total.is_finite() && link.total <= 0.0) {
        return Err(ModelError::invalid("link.total", "must be finite and non-positive"));
    }
    Ok(link.transmission() * detector.efficiency)
}

/// Receiver outcome for a photon from `entry`: passive random basis, with a
/// misalignment flip when the bases agree.
fn measure<R: Rng + ?Sized>(entry: &SentEntry, misalignment: f64, rng: &mut R) -> (Basis, bool) {
    let basis = Basis::random(rng);
    let bit = if basis == entry.basis {
        entry.bit ^ rng.random_bool(misalignment)
    } else {
        rng.random()
    };
    (basis, bit)
}

fn signal_click<R: Rng + ?Sized>(
    entry: &SentEntry,
    index: usize,
    period_ps: i64,
    detector: &DetectorConfig,
    jitter: &Jitter,
    rng: &mut R,
) -> RawClick {
    let (basis, bit) = measure(entry, detector.misalignment_error, rng);
    RawClick {
        detection: Detection {
            time_ps: entry.slot as i64 * period_ps + jitter.sample(rng),
            basis,
            bit,
        },
        origin: Origin::Signal,
        source: Some(index),
    }
}

/// Unique slots nearest to each noise click, ascending.
fn noise_slots(noise: &[RawClick], period_ps: i64, pulses: u64) -> Vec<u64> {
    let mut slots: Vec<u64> = noise
        .iter()
        .map(|c| ((c.detection.time_ps as f64 / period_ps as f64).round() as u64).min(pulses.saturating_sub(1)))
        .collect();
    slots.dedup();
    slots
}

fn assemble(
    sent: SentLog,
    photons: Vec<u32>,
    single_photon_sent: u64,
    mut clicks: Vec<RawClick>,
    noise: Vec<RawClick>,
    detector: &DetectorConfig,
    eta: f64,
) -> WcpRun {
    clicks.extend(noise);
    let kept = dead_time_filter(clicks, detector.dead_time_ps());
    let (record, origins, _) = split_truth(kept);
    WcpRun {
        sent,
        record,
        truth: SimulationTruth {
            origins,
            photons,
            single_photon_sent,
            transmission: eta,
        },
    }
}

/// Photon-exact channel: every pulse and every photon is drawn.
pub fn apply_channel(source: WcpEmitter, link: &LinkBudget, detector: &DetectorConfig, seed: u64) -> Result<WcpRun> {
    let eta = transmission(link, detector)?;
    let config = *source.config();
    let period = config.period_ps();
    let pulses = source.total_pulses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Jitter::new(detector.jitter_sigma);
    let noise = noise_clicks(detector, pulses as i64 * period, &mut rng);
    let dark_slots = noise_slots(&noise, period, pulses);

    let mut sent = SentLog {
        period_ps: period,
        ..SentLog::default()
    };
    let (mut photons, mut clicks) = (Vec::new(), Vec::new());
    let mut single = 0u64;
    let mut next_dark = dark_slots.iter().peekable();
    for pulse in source {
        sent.sent_per_class[pulse.intensity.index()] += 1;
        single += u64::from(pulse.photons == 1);
        let survived = (0..pulse.photons).filter(|_| rng.random_bool(eta)).count();
        let dark_here = next_dark.next_if_eq(&&pulse.slot).is_some();
        if survived == 0 && !dark_here {
            continue;
        }
        let entry = SentEntry {
            slot: pulse.slot,
            intensity: pulse.intensity,
            basis: pulse.basis,
            bit: pulse.bit,
        };
        if survived > 0 {
            clicks.push(signal_click(&entry, sent.entries.len(), period, detector, &jitter, &mut rng));
        }
        sent.entries.push(entry);
        photons.push(pulse.photons);
    }
    Ok(assemble(sent, photons, single, clicks, noise, detector, eta))
}

/// Failures before the first success, by inversion. `log_q` is ln(1 − p).
/// Stays O(1) for vanishing p, where the result saturates.
fn geometric_skip<R: Rng + ?Sized>(log_q: f64, rng: &mut R) -> u64 {
    if log_q == f64::NEG_INFINITY {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / log_q).floor() as u64
}

/// Zero-truncated Poisson draw by inversion.
fn truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    let target = rng.random::<f64>() * -(-lambda).exp_m1();
    let mut term = (-lambda).exp();
    let mut cum = 0.0;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= lambda / k as f64;
        cum += term;
        if cum >= target || term < 1e-300 {
            return k;
        }
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64; 3], rng: &mut R) -> Intensity {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for class in Intensity::ALL {
        u -= weights[class.index()];
        if u < 0.0 {
            return class;
        }
    }
    Intensity::ALL.into_iter().rev().find(|c| weights[c.index()] > 0.0).unwrap_or(Intensity::Vacuum)
}

fn poisson_or_zero<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as u32
    } else {
        0
    }
}

/// Pass-scale channel: jumps directly between clicking slots, drawing each
/// clicking pulse from its exact conditional distribution. Non-clicking
/// pulses are only counted.
pub fn simulate_wcp_aggregate(
    config: &WcpSourceConfig,
    duration: f64,
    link: &LinkBudget,
    detector: &DetectorConfig,
    seed: u64,
) -> Result<WcpRun> {
    config.validate()?;
    if !(duration > 0.0) {
        return Err(ModelError::invalid("duration", "must be positive"));
    }
    let eta = transmission(link, detector)?;
    let period = config.period_ps();
    let pulses = super::pulse_count(config, duration);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Jitter::new(detector.jitter_sigma);
    let noise = noise_clicks(detector, pulses as i64 * period, &mut rng);
    let dark_slots = noise_slots(&noise, period, pulses);

    let fractions = config.fractions();
    let means = config.means();
    let click_weight: [f64; 3] = std::array::from_fn(|c| fractions[c] * -(-means[c] * eta).exp_m1());
    let quiet_weight: [f64; 3] = std::array::from_fn(|c| fractions[c] * (-means[c] * eta).exp());
    let p_click: f64 = click_weight.iter().sum();

    let mut sent = SentLog {
        period_ps: period,
        ..SentLog::default()
    };
    let (mut photons, mut clicks) = (Vec::new(), Vec::new());
    let mut single = 0u64;
    let mut logged = [0u64; 3];

    let log_quiet = |slot: u64, sent: &mut SentLog, photons: &mut Vec<u32>, rng: &mut ChaCha8Rng| {
        let intensity = pick(&quiet_weight, rng);
        let n = poisson_or_zero(means[intensity.index()] * (1.0 - eta), rng);
        sent.entries.push(SentEntry {
            slot,
            intensity,
            basis: Basis::random(rng),
            bit: rng.random(),
        });
        photons.push(n);
        (intensity, n)
    };

    let mut darks = dark_slots.iter().copied().peekable();
    let log_quiet_p = (-p_click.min(1.0)).ln_1p();
    let mut slot: u64 = 0;
    let mut first = true;
    loop {
        let click_slot = if p_click > 0.0 {
            let skip = geometric_skip(log_quiet_p, &mut rng);
            let s = if first { skip } else { slot.saturating_add(skip).saturating_add(1) };
            first = false;
            s
        } else {
            u64::MAX
        };
        while let Some(d) = darks.next_if(|&d| d < click_slot.min(pulses)) {
            let (c, n) = log_quiet(d, &mut sent, &mut photons, &mut rng);
            logged[c.index()] += 1;
            single += u64::from(n == 1);
        }
        if click_slot >= pulses {
            break;
        }
        darks.next_if_eq(&click_slot);
        slot = click_slot;
        let intensity = pick(&click_weight, &mut rng);
        let mean = means[intensity.index()];
        let n = truncated_poisson(mean * eta, &mut rng) + poisson_or_zero(mean * (1.0 - eta), &mut rng);
        let entry = SentEntry {
            slot,
            intensity,
            basis: Basis::random(&mut rng),
            bit: rng.random(),
        };
        clicks.push(signal_click(&entry, sent.entries.len(), period, detector, &jitter, &mut rng));
        sent.entries.push(entry);
        photons.push(n);
        logged[intensity.index()] += 1;
        single += u64::from(n == 1);
    }

    // Remaining pulses never clicked and were never logged.
    let mut remaining = pulses - logged.iter().sum::<u64>();
    let mut weight_left: f64 = quiet_weight.iter().sum();
    for class in Intensity::ALL {
        let c = class.index();
        let n_c = if class == Intensity::Vacuum || weight_left <= 0.0 {
            remaining
        } else {
            let p = (quiet_weight[c] / weight_left).clamp(0.0, 1.0);
            Binomial::new(remaining, p).expect("valid binomial").sample(&mut rng)
        };
        remaining -= n_c;
        weight_left -= quiet_weight[c];
        sent.sent_per_class[c] = logged[c] + n_c;
        let lost_mean = means[c] * (1.0 - eta);
        let p_single = lost_mean * (-lost_mean).exp();
        if n_c > 0 && p_single > 0.0 {
            single += Binomial::new(n_c, p_single).expect("valid binomial").sample(&mut rng);
        }
    }
    Ok(assemble(sent, photons, single, clicks, noise, detector, eta))
}
