use realfft::RealFftPlanner;
use serde::Serialize;

use super::{DetectionRecord, PS_PER_S};
use crate::error::{ModelError, Result};

/// Peaks weaker than this, in units of the competing candidates' spread,
/// are not a lock.
pub const MIN_LOCK_SIGNIFICANCE: f64 = 5.0;
const COARSE_BINS: usize = 1 << 23;
const CANDIDATES: usize = 128;
const SHORTLIST: usize = 4096;
const REFINE_HALF_BINS: i64 = 64;
const PEAK_HALF_BINS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetEstimate {
    /// remote − local clock offset at the start of the peak bin, ps.
    pub offset_ps: i64,
    /// Sub-bin position of the coincidence peak within and around that bin, ps.
    pub refinement_ps: f64,
    pub significance: f64,
    /// Counts in the winning fine bin.
    pub peak_counts: u64,
    pub locked: bool,
}

impl OffsetEstimate {
    pub fn offset_seconds(&self) -> f64 {
        (self.offset_ps as f64 + self.refinement_ps) / PS_PER_S
    }

    /// Whole-picosecond offset for re-aligning the remote record.
    pub fn offset_rounded_ps(&self) -> i64 {
        self.offset_ps + self.refinement_ps.round() as i64
    }
}

/// Differences `r − l` falling in `[lo, hi)` ps, histogrammed on the fine grid
/// anchored at zero. Returns counts for bins `lo/bin ..`.
fn difference_histogram(local: &[i64], remote: &[i64], lo: i64, hi: i64, bin: i64) -> (i64, Vec<u64>) {
    let first = lo.div_euclid(bin);
    let last = (hi - 1).div_euclid(bin);
    let mut counts = vec![0u64; (last - first + 1) as usize];
    for &r in remote {
        let start = local.partition_point(|&l| l <= r - hi);
        for &l in &local[start..] {
            let d = r - l;
            if d < lo {
                break;
            }
            counts[(d.div_euclid(bin) - first) as usize] += 1;
        }
    }
    (first, counts)
}

/// Coarse circular cross-correlation of the binned streams; entry `k` is
/// lag `k` bins (negative lags wrap to the end).
fn coarse_correlation(local: &[i64], remote: &[i64], origin: i64, bin: i64) -> Vec<f32> {
    let mut planner = RealFftPlanner::<f32>::new();
    let forward = planner.plan_fft_forward(COARSE_BINS);
    let inverse = planner.plan_fft_inverse(COARSE_BINS);
    let spectrum = |times: &[i64]| {
        let mut h = forward.make_input_vec();
        for &t in times {
            h[((t - origin) / bin) as usize] += 1.0;
        }
        let mut out = forward.make_output_vec();
        forward.process(&mut h, &mut out).expect("fft sizes match");
        out
    };
    let l = spectrum(local);
    let mut r = spectrum(remote);
    for (rv, lv) in r.iter_mut().zip(&l) {
        *rv *= lv.conj();
    }
    let mut corr = inverse.make_output_vec();
    inverse.process(&mut r, &mut corr).expect("fft sizes match");
    corr
}

/// Clock offset between two detection records by cross-correlation.
///
/// A coarse FFT correlation over ±`search_span` seconds shortlists the
/// strongest lags. Each is re-examined with an exact histogram of timestamp
/// differences at `bin` seconds. The winner's significance is its excess over
/// the other candidates' peaks, in units of their spread.
pub fn match_offset(local: &DetectionRecord, remote: &DetectionRecord, search_span: f64, bin: f64) -> Result<OffsetEstimate> {
    if local.is_empty() || remote.is_empty() {
        return Err(ModelError::invalid("records", "both records must be non-empty"));
    }
    if !(search_span > 0.0 && search_span.is_finite()) {
        return Err(ModelError::invalid("search_span", "must be positive"));
    }
    let bin_ps = (bin * PS_PER_S).round() as i64;
    if bin_ps < 1 {
        return Err(ModelError::invalid("bin", "must be at least 1 ps"));
    }
    let span_ps = (search_span * PS_PER_S).round() as i64;
    let lt: Vec<i64> = local.times().collect();
    let rt: Vec<i64> = remote.times().collect();

    let origin = lt[0].min(rt[0]);
    let extent = lt[lt.len() - 1].max(rt[rt.len() - 1]) - origin;
    let coarse_bin = ((extent + span_ps) / (COARSE_BINS as i64 - 2) + 1).max(bin_ps);
    let max_lag = span_ps / coarse_bin + 1;
    let corr = coarse_correlation(&lt, &rt, origin, coarse_bin);
    let at = |lag: i64| corr[lag.rem_euclid(COARSE_BINS as i64) as usize];

    let mut pairs: Vec<(f32, i64)> = (-max_lag..=max_lag).map(|k| (at(k) + at(k + 1), k)).collect();
    let keep = SHORTLIST.min(pairs.len());
    if keep < pairs.len() {
        pairs.select_nth_unstable_by(keep - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        pairs.truncate(keep);
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut candidates: Vec<i64> = Vec::with_capacity(CANDIDATES);
    for &(_, k) in &pairs {
        if candidates.iter().all(|c| (c - k).abs() > 2) {
            candidates.push(k);
            if candidates.len() == CANDIDATES {
                break;
            }
        }
    }

    // Fine peak of every candidate: (counts, absolute fine bin).
    let peaks: Vec<(u64, i64)> = candidates
        .iter()
        .map(|&k| {
            let (first, counts) = difference_histogram(&lt, &rt, (k - 1) * coarse_bin, (k + 2) * coarse_bin, bin_ps);
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, first + i as i64))
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                .unwrap_or((0, 0))
        })
        .collect();
    let (best_i, &(best, peak_bin)) = peaks
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .expect("at least one candidate");
    let others: Vec<f64> = peaks
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best_i)
        .map(|(_, p)| p.0 as f64)
        .collect();
    let significance = if others.is_empty() {
        0.0
    } else {
        let n = others.len() as f64;
        let mean = others.iter().sum::<f64>() / n;
        let sd = (others.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        (best as f64 - mean) / sd.max(mean.sqrt()).max(1.0)
    };

    let (first, counts) = difference_histogram(
        &lt,
        &rt,
        (peak_bin - REFINE_HALF_BINS) * bin_ps,
        (peak_bin + REFINE_HALF_BINS + 1) * bin_ps,
        bin_ps,
    );
    let off_peak: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| (first + *i as i64 - peak_bin).abs() > PEAK_HALF_BINS)
        .map(|(_, &c)| c as f64)
        .collect();
    let background = off_peak.iter().sum::<f64>() / off_peak.len().max(1) as f64;
    let (mut weight, mut moment) = (0.0, 0.0);
    for (i, &c) in counts.iter().enumerate() {
        let k = first + i as i64 - peak_bin;
        if k.abs() <= 2 {
            let w = (c as f64 - background).max(0.0);
            weight += w;
            moment += w * k as f64;
        }
    }
    let shift = if weight > 0.0 { moment / weight } else { 0.0 };
    Ok(OffsetEstimate {
        offset_ps: peak_bin * bin_ps,
        refinement_ps: (0.5 + shift) * bin_ps as f64,
        significance,
        peak_counts: best,
        locked: significance >= MIN_LOCK_SIGNIFICANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceReport {
    pub coincidences: u64,
    pub same_basis: u64,
    pub errors: u64,
    /// Undefined without same-basis coincidences.
    pub qber: Option<f64>,
    /// Overlap of the two records, s.
    pub duration: f64,
    pub coincidence_rate: f64,
    /// Matches in a window displaced well away from the peak.
    pub accidental_coincidences: u64,
    pub accidental_rate: f64,
}

fn nearest_within(local: &[i64], t: i64, window: i64) -> Option<usize> {
    let i = local.partition_point(|&l| l < t - window);
    let mut best: Option<usize> = None;
    for (j, &l) in local.iter().enumerate().skip(i) {
        if l > t + window {
            break;
        }
        if best.is_none_or(|b| (l - t).abs() < (local[b] - t).abs()) {
            best = Some(j);
        }
    }
    best
}

/// Coincidences within ±`window_ps` after removing `offset_ps` from the remote
/// clock, with an accidental estimate from a displaced window.
pub fn coincidence_qber(local: &DetectionRecord, remote: &DetectionRecord, offset_ps: i64, window_ps: i64) -> CoincidenceReport {
    let lt: Vec<i64> = local.times().collect();
    let displacement = (20 * window_ps).max(1_000_000);
    let (mut coincidences, mut same, mut errors, mut accidentals) = (0u64, 0u64, 0u64, 0u64);
    for r in &remote.events {
        let t = r.time_ps - offset_ps;
        if let Some(j) = nearest_within(&lt, t, window_ps) {
            coincidences += 1;
            let l = &local.events[j];
            if l.basis == r.basis {
                same += 1;
                errors += u64::from(l.bit != r.bit);
            }
        }
        if nearest_within(&lt, t - displacement, window_ps).is_some() {
            accidentals += 1;
        }
    }
    let duration = match (local.events.first(), local.events.last(), remote.events.first(), remote.events.last()) {
        (Some(a), Some(b), Some(c), Some(d)) => {
            ((b.time_ps.min(d.time_ps - offset_ps) - a.time_ps.max(c.time_ps - offset_ps)) as f64 / PS_PER_S).max(0.0)
        }
        _ => 0.0,
    };
    let per_s = |n: u64| if duration > 0.0 { n as f64 / duration } else { 0.0 };
    CoincidenceReport {
        coincidences,
        same_basis: same,
        errors,
        qber: (same > 0).then(|| errors as f64 / same as f64),
        duration,
        coincidence_rate: per_s(coincidences),
        accidental_coincidences: accidentals,
        accidental_rate: per_s(accidentals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Basis, Detection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_record(rate: f64, duration_s: f64, seed: u64) -> DetectionRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (rate * duration_s) as usize;
        let mut times: Vec<i64> = (0..n).map(|_| rng.random_range(0..(duration_s * PS_PER_S) as i64)).collect();
        times.sort_unstable();
        times.dedup();
        DetectionRecord {
            events: times
                .into_iter()
                .map(|t| Detection {
                    time_ps: t,
                    basis: Basis::Rectilinear,
                    bit: false,
                })
                .collect(),
        }
    }

    #[test]
    fn shifted_copy_is_found() {
        let local = poisson_record(2e4, 1.0, 1);
        let remote = local.shifted(3_700_000_000);
        let est = match_offset(&local, &remote, 0.01, 1e-9).unwrap();
        assert!(est.locked);
        assert!((est.offset_seconds() - 3.7e-3).abs() <= 1e-9, "{est:?}");
    }

    #[test]
    fn independent_streams_do_not_lock() {
        let local = poisson_record(2e4, 1.0, 2);
        let remote = poisson_record(2e4, 1.0, 3);
        let est = match_offset(&local, &remote, 0.01, 1e-9).unwrap();
        assert!(!est.locked, "{est:?}");
    }

    #[test]
    fn histogram_bins_are_anchored_at_zero() {
        let (first, counts) = difference_histogram(&[0, 10], &[2_500, 2_505], 0, 5_000, 1_000);
        assert_eq!(first, 0);
        assert_eq!(counts, vec![0, 0, 4, 0, 0]);
        let (first, counts) = difference_histogram(&[1_000], &[0], -2_000, 0, 1_000);
        assert_eq!((first, counts), (-2, vec![0, 1]));
    }

    #[test]
    fn empty_records_rejected() {
        assert!(match_offset(&DetectionRecord::default(), &poisson_record(10.0, 1.0, 1), 1.0, 1e-9).is_err());
    }
}
