use qlink_core::constants::SECONDS_PER_DAY;
use qlink_core::mission::{run_mission, CommsConfig, MissionConfig};

fn fast(altitude_m: f64) -> MissionConfig {
    let mut cfg = MissionConfig::default();
    cfg.deployment.altitude_m = altitude_m;
    cfg.schedule.pointing_sample_s = 0.0;
    cfg
}

#[test]
fn twelve_month_default_mission() {
    let start = std::time::Instant::now();
    let report = run_mission(&MissionConfig::default(), 12, 7).unwrap();
    let scheduled: Vec<_> = report.scheduled().collect();
    println!(
        "opportunities {} scheduled {} secure bits {:.3e} elapsed {:?}",
        report.opportunities(),
        scheduled.len(),
        report.total_secure_bits(),
        start.elapsed()
    );
    assert!((100..=220).contains(&report.opportunities()));
    assert_eq!(report.months.len(), 12);
    assert_eq!(report.months.iter().map(|m| m.opportunities as usize).sum::<usize>(), report.opportunities());
    assert!(!scheduled.is_empty());
    assert!(scheduled.iter().all(|p| p.depth_of_discharge <= MissionConfig::default().power.depth_of_discharge_limit));
    for p in &scheduled {
        let clear = p.backlog_clear_s.expect("backlog clears");
        assert!(clear <= SECONDS_PER_DAY, "pass {} cleared after {clear} s", p.index);
        if !p.lock_lost {
            assert!(p.key.unwrap().secure_key_length > 0.0);
        }
    }
    let mut b = 0.0f64;
    for s in &report.backlog {
        b = (b + s.generated_bytes - s.downlink_capacity_bytes).max(0.0);
        assert_eq!(b, s.backlog_bytes);
    }
    let first = report.altitude_profile.first().unwrap().altitude_m;
    let last = report.altitude_profile.last().unwrap().altitude_m;
    assert!(last < first);
}

#[test]
fn passes_shorten_as_the_orbit_drops() {
    let mean = |alt: f64| {
        let mut cfg = fast(alt);
        cfg.schedule.end_altitude_m = 200e3;
        let r = run_mission(&cfg, 3, 1).unwrap();
        assert!(r.opportunities() > 5);
        r.passes.iter().map(|p| p.duration_s).sum::<f64>() / r.opportunities() as f64
    };
    let (h, l) = (mean(400e3), mean(300e3));
    assert!(l < h, "{l} vs {h}");
}

#[test]
fn rates_climb_as_range_falls() {
    let high = run_mission(&fast(450e3), 2, 3).unwrap();
    let low = run_mission(&fast(320e3), 2, 3).unwrap();
    let best = |r: &qlink_core::mission::MissionReport| r.scheduled().filter_map(|p| p.culmination_rate).fold(0.0, f64::max);
    assert!(best(&low) > best(&high));
}

#[test]
fn without_downlink_the_backlog_only_grows() {
    let mut cfg = fast(400e3);
    cfg.comms = CommsConfig {
        station_count: 0,
        ..CommsConfig::default()
    };
    let report = run_mission(&cfg, 2, 5).unwrap();
    assert!(report.backlog.len() > 1);
    assert!(report.backlog.windows(2).all(|w| w[1].backlog_bytes >= w[0].backlog_bytes));
}

#[test]
fn mission_is_reproducible() {
    let a = run_mission(&MissionConfig::default(), 1, 11).unwrap();
    let b = run_mission(&MissionConfig::default(), 1, 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decay_ends_experiments() {
    let mut cfg = fast(320e3);
    cfg.solar = qlink_core::orbit::SolarActivity::High;
    let report = run_mission(&cfg, 24, 2).unwrap();
    let end = report.end_of_experiments.expect("orbit falls below 300 km");
    assert!(report.passes.iter().all(|p| p.culmination <= end));
    assert!(report.months.len() < 24);
}
