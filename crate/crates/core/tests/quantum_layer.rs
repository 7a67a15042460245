use qlink_core::link::LinkBudget;
use qlink_core::quantum::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn link(total_db: f64) -> LinkBudget {
    LinkBudget {
        diffraction_geometric_loss: total_db,
        pointing_loss: 0.0,
        atmospheric_loss: 0.0,
        optics_efficiency_loss: 0.0,
        total: total_db,
        ground_spot_diameter: 1.0,
        slant_range: 5e5,
    }
}

fn quiet_detector() -> DetectorConfig {
    DetectorConfig {
        dark_rate: 0.0,
        background_rate: 0.0,
        misalignment_error: 0.0,
        ..DetectorConfig::default()
    }
}

#[test]
fn signal_rate_follows_link_loss() {
    let cfg = WcpSourceConfig {
        signal_fraction: 1.0,
        decoy_fraction: 0.0,
        vacuum_fraction: 0.0,
        ..WcpSourceConfig::default()
    };
    for (db, expected) in [(-30.0, 2.5e4), (-40.0, 2.5e3)] {
        let run = simulate_wcp_aggregate(&cfg, 1.0, &link(db), &quiet_detector(), 1).unwrap();
        let rate = run.record.len() as f64;
        assert!((rate - expected).abs() < 4.0 * expected.sqrt(), "{db} dB: {rate}");
    }
}

#[test]
fn dark_counts_alone() {
    let detector = DetectorConfig {
        dark_rate: 500.0,
        background_rate: 0.0,
        ..DetectorConfig::default()
    };
    let run = simulate_wcp_aggregate(&WcpSourceConfig::default(), 10.0, &link(-300.0), &detector, 2).unwrap();
    let n = run.record.len() as f64;
    assert!((n - 5000.0).abs() < 3.0 * 5000f64.sqrt(), "{n}");
    assert!(run.truth.origins.iter().all(|o| *o == Origin::Dark));
}

#[test]
fn depolarising_error_shows_up_in_qber() {
    let detector = DetectorConfig {
        misalignment_error: 0.05,
        ..quiet_detector()
    };
    let run = simulate_wcp_aggregate(&WcpSourceConfig::default(), 2.0, &link(-20.0), &detector, 3).unwrap();
    let sift = sift_bb84(&run.sent, &run.record, DEFAULT_PAIRING_WINDOW_PS);
    assert!(sift.sifted_bits >= 100_000, "{}", sift.sifted_bits);
    let q = sift.qber.unwrap();
    assert!((q - 0.05).abs() < 0.005, "{q}");
    assert!((sift.sifting_fraction() - 0.5).abs() < 0.01);
}

#[test]
fn unrelated_measurements_give_half_errors() {
    let run = simulate_wcp_aggregate(&WcpSourceConfig::default(), 2.0, &link(-20.0), &quiet_detector(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let scrambled = DetectionRecord {
        events: run
            .record
            .events
            .iter()
            .map(|d| Detection {
                time_ps: d.time_ps,
                basis: if rng.random() { Basis::Diagonal } else { Basis::Rectilinear },
                bit: rng.random(),
            })
            .collect(),
    };
    let sift = sift_bb84(&run.sent, &scrambled, DEFAULT_PAIRING_WINDOW_PS);
    assert!(sift.sifted_bits >= 100_000);
    assert!((sift.qber.unwrap() - 0.5).abs() < 0.01);
}

#[test]
fn ideal_channel_has_no_errors() {
    let run = apply_channel(emit_wcp(&WcpSourceConfig::default(), 1e-3, 5).unwrap(), &link(0.0), &quiet_detector(), 6).unwrap();
    let sift = sift_bb84(&run.sent, &run.record, DEFAULT_PAIRING_WINDOW_PS);
    assert!(sift.sifted_bits > 1000);
    assert_eq!(sift.qber, Some(0.0));
}

#[test]
fn decoy_bounds_hold_on_randomised_passes() {
    let cfg = WcpSourceConfig::default();
    let detector = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for run_idx in 0..20 {
        let db = rng.random_range(-32.0..-24.0);
        let eta = 10f64.powf(db / 10.0) * detector.efficiency;
        let sifted_rate = 0.5 * (expected_click_rate(&cfg, eta, &detector) - detector.noise_rate());
        let duration = 1.1e6 / sifted_rate;
        let run = simulate_wcp_aggregate(&cfg, duration, &link(db), &detector, rng.random()).unwrap();
        let sift = sift_bb84(&run.sent, &run.record, DEFAULT_PAIRING_WINDOW_PS);
        let report = key_report(&cfg, &sift);
        let (y1, e1) = run.true_single_photon(DEFAULT_PAIRING_WINDOW_PS);
        assert!(sift.sifted_bits >= 1_000_000, "run {run_idx}: {}", sift.sifted_bits);
        assert!(!report.bounds_invalid, "run {run_idx}");
        assert!(report.y1_lower <= y1, "run {run_idx} at {db:.1} dB: {} > {y1}", report.y1_lower);
        assert!(report.e1_upper >= e1, "run {run_idx} at {db:.1} dB: {} < {e1}", report.e1_upper);
        assert!((sift.sifting_fraction() - 0.5).abs() < 0.01);
        assert!(report.secure_key_length > 0.0);
    }
}

#[test]
fn yield_bound_is_tight_on_a_full_pass() {
    let cfg = WcpSourceConfig::default();
    let run = simulate_wcp_aggregate(&cfg, 400.0, &link(-35.0), &DetectorConfig::default(), 7).unwrap();
    let sift = sift_bb84(&run.sent, &run.record, DEFAULT_PAIRING_WINDOW_PS);
    let report = key_report(&cfg, &sift);
    let (y1, _) = run.true_single_photon(DEFAULT_PAIRING_WINDOW_PS);
    assert_eq!(report.sent_pulses, 40_000_000_000);
    assert!(report.y1_lower <= y1 && report.y1_lower > 0.9 * y1, "{} vs {y1}", report.y1_lower);
}

fn entangled(duration: f64, db: f64, offset_ps: i64, visibility: f64, seed: u64) -> EntangledRun {
    let cfg = EntangledSourceConfig {
        intrinsic_visibility: visibility,
        ..EntangledSourceConfig::default()
    };
    let local_detector = DetectorConfig {
        background_rate: 0.0,
        ..DetectorConfig::default()
    };
    detect_pairs(
        emit_entangled(&cfg, duration, seed).unwrap(),
        &link(db),
        &local_detector,
        &DetectorConfig::default(),
        offset_ps,
        seed + 1,
    )
    .unwrap()
}

#[test]
fn entangled_qber_tracks_visibility() {
    for v in [0.9, 0.94, 1.0] {
        let cfg = EntangledSourceConfig {
            intrinsic_visibility: v,
            ..EntangledSourceConfig::default()
        };
        let (mut n, mut err) = (0u64, 0u64);
        for p in emit_entangled(&cfg, 1.0, 11).unwrap().take(100_000) {
            if p.local_basis == p.remote_basis {
                n += 1;
                err += u64::from(p.local_bit != p.remote_bit);
            }
        }
        let q = err as f64 / n as f64;
        assert!((q - (1.0 - v) / 2.0).abs() < 0.01, "V={v}: {q}");
    }
}

#[test]
fn offsets_across_the_search_span_are_recovered() {
    for (i, offset) in [-0.987_654_321, -0.2, 0.012_345, 0.5, 0.999_999].into_iter().enumerate() {
        let offset_ps = (offset * 1e12) as i64;
        let run = entangled(1.0, -35.0, offset_ps, 0.94, 100 + 2 * i as u64);
        let est = match_offset(&run.local, &run.remote, 1.0, 1e-9).unwrap();
        assert!(est.locked, "{offset}: {est:?}");
        let err = (est.offset_seconds() - offset_ps as f64 * 1e-12).abs();
        assert!(err <= 2e-9, "{offset}: off by {err:e} s ({est:?})");
    }
}

#[test]
fn independent_streams_never_lock() {
    for seed in 0..3 {
        let a = entangled(1.0, -35.0, 0, 0.94, 200 + 2 * seed);
        let b = entangled(1.0, -35.0, 0, 0.94, 300 + 2 * seed);
        let est = match_offset(&a.local, &b.remote, 1.0, 1e-9).unwrap();
        assert!(!est.locked, "{est:?}");
    }
}

#[test]
fn peak_agrees_with_brute_force_correlation() {
    let offset_ps = 345_678_901;
    let run = entangled(0.05, -30.0, offset_ps, 0.94, 400);
    let est = match_offset(&run.local, &run.remote, 1e-3, 1e-9).unwrap();

    let span = 1_000_000_000i64;
    let bin = 1_000i64;
    let mut hist = vec![0u32; (2 * span / bin) as usize];
    for r in run.remote.times() {
        for l in run.local.times() {
            let d = r - l;
            if (-span..span).contains(&d) {
                hist[((d + span) / bin) as usize] += 1;
            }
        }
    }
    let (peak, &count) = hist.iter().enumerate().max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i))).unwrap();
    assert_eq!(est.offset_ps, peak as i64 * bin - span);
    assert_eq!(est.peak_counts, count as u64);
}

#[test]
fn offset_is_translation_equivariant() {
    let run = entangled(0.2, -30.0, 1_234_567_000, 0.94, 500);
    let base = match_offset(&run.local, &run.remote, 0.01, 1e-9).unwrap();
    let delta = 2_718_281_000;
    let moved = match_offset(&run.local, &run.remote.shifted(delta), 0.01, 1e-9).unwrap();
    assert!(base.locked && moved.locked);
    assert_eq!(moved.offset_ps - base.offset_ps, delta);
    assert_eq!(moved.refinement_ps, base.refinement_ps);
}

#[test]
fn coincidence_qber_with_accidentals() {
    let ideal = entangled(0.5, -20.0, 777_000, 1.0, 600);
    let r = coincidence_qber(&ideal.local, &ideal.remote, 777_000, 1_000);
    assert!(r.same_basis > 1000);
    let q = r.qber.unwrap();
    assert!(q < 0.01, "{q}");

    let run = entangled(1.0, -35.0, 12_345_000_000, 0.94, 700);
    let est = match_offset(&run.local, &run.remote, 0.1, 1e-9).unwrap();
    let r = coincidence_qber(&run.local, &run.remote, est.offset_rounded_ps(), 1_000);
    let q = r.qber.unwrap();
    assert!((q - 0.03).abs() <= 0.01, "{q} ({r:?})");
    assert!(r.accidental_rate < 0.1 * r.coincidence_rate);
}

#[test]
fn accidentals_scale_with_window() {
    let noisy = DetectorConfig {
        background_rate: 5e4,
        ..DetectorConfig::default()
    };
    let run = detect_pairs(
        emit_entangled(&EntangledSourceConfig::default(), 1.0, 800).unwrap(),
        &link(-35.0),
        &DetectorConfig::default(),
        &noisy,
        0,
        801,
    )
    .unwrap();
    let narrow = coincidence_qber(&run.local, &run.remote, 0, 1_000);
    let wide = coincidence_qber(&run.local, &run.remote, 0, 10_000);
    let ratio = wide.accidental_rate / narrow.accidental_rate;
    assert!(narrow.accidental_coincidences > 100);
    assert!((ratio - 10.0).abs() < 2.0, "{ratio}");
}

#[test]
fn runs_are_bit_exact_under_a_seed() {
    let a = entangled(0.05, -30.0, 5, 0.94, 900);
    let b = entangled(0.05, -30.0, 5, 0.94, 900);
    assert_eq!(a, b);
    let cfg = WcpSourceConfig::default();
    let x = simulate_wcp_aggregate(&cfg, 0.5, &link(-30.0), &DetectorConfig::default(), 1).unwrap();
    let y = simulate_wcp_aggregate(&cfg, 0.5, &link(-30.0), &DetectorConfig::default(), 1).unwrap();
    assert_eq!(x.record, y.record);
}
