//! Acceptance suite: one PASS/FAIL line per criterion, then a single verdict.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::Vector3;
use qlink_core::constants::{EARTH_EQUATORIAL_RADIUS, EARTH_MEAN_RADIUS, J2, MU_EARTH, SECONDS_PER_DAY};
use qlink_core::geometry::{
    dispersion_offset, doppler_shift, find_passes, point_ahead, slant_range_at_elevation, GroundStation, Observer,
    PassEvent, PassFinder,
};
use qlink_core::link::{
    ground_spot, link_budget, nominal_point, pointing_loss, LinkBudget, LinkParameters, OpticalSourceGeometry,
};
use qlink_core::mission::{
    backlog_series, clearance_times, data_budget, run_mission, CommsConfig, DataSource, MissionConfig,
};
use qlink_core::orbit::{
    cycle_anchor,
    deorbit_lifetime, eclipse, propagate, OrbitState, PropagationSettings, Propagator, SolarActivity, SpacecraftBody,
};
use qlink_core::pointing::{add_noise, centroid, jitter_summary_to_loss, render_spot, simulate_pointing_run, PointingConfig};
use qlink_core::quantum::*;
use qlink_core::time::ScenarioClock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn iss_like() -> OrbitState {
    OrbitState::circular(0.0, 400e3, 51.6, 0.0, 0.0)
}

fn c01_pass_statistics() -> Outcome {
    let start = Instant::now();
    let clock = ScenarioClock::default();
    let observer = Observer::new(GroundStation::default(), clock).unwrap();
    let settings = PropagationSettings::new(SpacecraftBody::default(), SolarActivity::VeryLow, true).with_clock(clock);
    let prop = Propagator::new(iss_like(), settings, 365.25 * SECONDS_PER_DAY, 10.0).unwrap();
    let mut finder = PassFinder::new(&observer, true);
    for s in prop {
        finder.push(&s).unwrap();
    }
    let passes = finder.finish();
    let mean_min = passes.iter().map(|p| p.duration_above_track_floor).sum::<f64>() / passes.len().max(1) as f64 / 60.0;
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        (100..=220).contains(&passes.len()) && (4.0..=8.0).contains(&mean_min) && elapsed <= 120.0,
        format!("{} passes, mean {mean_min:.2} min above 10 deg, {elapsed:.1} s", passes.len()),
    )
}

fn c02_divergence_and_spot() -> Outcome {
    let ent = OpticalSourceGeometry::entangled();
    let wcp = OpticalSourceGeometry::wcp();
    let (d_ent, d_wcp) = (ent.divergence_half_angle(), wcp.divergence_half_angle());
    let spot_wcp = ground_spot(&wcp, 400e3);
    let spot_ent = ground_spot(&ent, slant_range_at_elevation(20.0, 400e3, EARTH_MEAN_RADIUS));
    let ok = ((d_ent - 7.8) / 7.8).abs() <= 0.02
        && (d_wcp - 4.57).abs() <= 0.01
        && ((d_wcp - 4.0) / 4.0).abs() <= 0.2
        && ((spot_wcp - 3.2) / 3.2).abs() <= 0.15
        && (12.0..=19.0).contains(&spot_ent);
    outcome(
        ok,
        format!(
            "entangled {d_ent:.3} urad, flat-top {d_wcp:.3} urad, WCP zenith spot {spot_wcp:.2} m, entangled 20 deg spot {spot_ent:.2} m"
        ),
    )
}

fn c03_link_loss_window() -> Outcome {
    let source = OpticalSourceGeometry::flat_top(0.1, 800.0);
    let params = LinkParameters {
        receiver_diameter: 1.0,
        jitter_sigma: 3.0,
        optics_efficiency: 0.5,
        ..LinkParameters::default()
    };
    let b = link_budget(&source, &nominal_point(90.0, 500e3), &params).unwrap();
    outcome(
        (-40.0..=-30.0).contains(&b.total),
        format!(
            "total {:.2} dB (geometric {:.2}, pointing {:.2}, atmosphere {:.2}, optics {:.2})",
            b.total, b.diffraction_geometric_loss, b.pointing_loss, b.atmospheric_loss, b.optics_efficiency_loss
        ),
    )
}

fn flat_link(total_db: f64) -> LinkBudget {
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

fn c04_ogs_rate_window() -> Outcome {
    let mut rates = Vec::new();
    for (i, db) in [-40.0, -35.0, -30.0].into_iter().enumerate() {
        let run = simulate_wcp_aggregate(&WcpSourceConfig::default(), 1.0, &flat_link(db), &DetectorConfig::default(), 40 + i as u64)
            .unwrap();
        rates.push(run.record.len() as f64);
    }
    outcome(
        rates.iter().all(|r| (1e3..=3e4).contains(r)),
        format!("detected rates at -40/-35/-30 dB: {:.0} / {:.0} / {:.0} per s", rates[0], rates[1], rates[2]),
    )
}

fn station_under(state: &OrbitState, clock: &ScenarioClock) -> GroundStation {
    let r = state.position;
    let lat = (r.z / r.norm()).asin().to_degrees();
    let lon = (r.y.atan2(r.x) - clock.gmst(state.epoch)).to_degrees();
    GroundStation {
        name: "under-track".into(),
        latitude: lat,
        longitude: (lon + 180.0).rem_euclid(360.0) - 180.0,
        altitude: 0.0,
        ..GroundStation::default()
    }
}

fn c05_point_ahead_and_doppler() -> Outcome {
    let clock = ScenarioClock::default();
    let settings = PropagationSettings::new(SpacecraftBody::default(), SolarActivity::Moderate, false);
    let traj = propagate(iss_like(), settings, 4000.0, 1.0).unwrap();
    let observer = Observer::new(station_under(&traj.states[2000], &clock), clock).unwrap();
    let pass = find_passes(&traj.states, &observer, false).unwrap().remove(0);
    let max_pa = pass.track.iter().map(point_ahead).fold(0.0, f64::max);
    let mut p = nominal_point(90.0, 400e3);
    p.range_rate = 7670.0;
    let shift = doppler_shift(&p, 800.0).abs();
    outcome(
        (48.0..=54.0).contains(&max_pa) && ((shift - 0.0205) / 0.0205).abs() <= 0.05,
        format!(
            "max point-ahead {max_pa:.2} urad (pass max elevation {:.2} deg), Doppler {shift:.5} nm",
            pass.max_elevation
        ),
    )
}

fn c06_dispersion() -> Outcome {
    let at20 = dispersion_offset(20.0, 532.0, 800.0).unwrap();
    let zenith = dispersion_offset(90.0, 532.0, 800.0).unwrap();
    outcome(
        (2.0..=6.0).contains(&at20) && zenith == 0.0,
        format!("532/800 nm offset {at20:.2} urad at 20 deg, {zenith} at zenith"),
    )
}

fn centroid_rms(electrons: f64, read_noise: f64, trials: usize, seed: u64) -> f64 {
    let psf = 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sq = 0.0;
    for _ in 0..trials {
        let x0 = 7.0 + rng.random_range(-0.5..0.5);
        let y0 = 7.0 + rng.random_range(-0.5..0.5);
        let mut img = render_spot(15, 15, x0, y0, psf, electrons);
        add_noise(&mut img, read_noise, true, &mut rng);
        let c = centroid(&img, psf, read_noise).unwrap();
        sq += (c.x - x0).powi(2) + (c.y - y0).powi(2);
    }
    (sq / (2 * trials) as f64).sqrt()
}

fn c07_centroiding() -> Outcome {
    let start = Instant::now();
    let moderate = centroid_rms(10_000.0, 10.0, 10_000, 71);
    let high = centroid_rms(10_000.0, 25.0, 10_000, 72);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        moderate < 1.0 / 40.0 && high < 1.0 / 20.0 && elapsed <= 60.0,
        format!("per-axis rms {moderate:.4} px (moderate), {high:.4} px (high), {elapsed:.1} s"),
    )
}

fn first_pass() -> PassEvent {
    let clock = ScenarioClock::default();
    let observer = Observer::new(GroundStation::default(), clock).unwrap();
    let settings = PropagationSettings::new(SpacecraftBody::default(), SolarActivity::Moderate, false);
    let traj = propagate(iss_like(), settings, 3.0 * SECONDS_PER_DAY, 10.0).unwrap();
    find_passes(&traj.states, &observer, false).unwrap().remove(0)
}

fn c08_fine_pointing() -> Outcome {
    let pass = first_pass();
    let run = simulate_pointing_run(&PointingConfig::default(), &pass, 8).unwrap();
    if run.lock_lost {
        return outcome(false, "lock lost".into());
    }
    let source = OpticalSourceGeometry::entangled();
    let measured = jitter_summary_to_loss(&run, &source).unwrap();
    let analytic = pointing_loss(run.rms_radial / 2f64.sqrt(), source.beam_half_angle()).unwrap();
    outcome(
        run.rms_radial <= 3.0 && (measured - analytic).abs() <= 0.3,
        format!(
            "rms radial {:.3} urad on a {:.1} deg pass; loss {measured:.3} dB measured vs {analytic:.3} dB analytic",
            run.rms_radial, pass.max_elevation
        ),
    )
}

fn c09_decoy_soundness() -> Outcome {
    let cfg = WcpSourceConfig::default();
    let detector = DetectorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut sound, mut min_sifted, mut worst_fraction) = (0, u64::MAX, 0.0f64);
    let runs = 20;
    for _ in 0..runs {
        let db = rng.random_range(-32.0..-24.0);
        let eta = 10f64.powf(db / 10.0) * detector.efficiency;
        let sifted_rate = 0.5 * (expected_click_rate(&cfg, eta, &detector) - detector.noise_rate());
        let run = simulate_wcp_aggregate(&cfg, 1.1e6 / sifted_rate, &flat_link(db), &detector, rng.random()).unwrap();
        let sift = sift_bb84(&run.sent, &run.record, DEFAULT_PAIRING_WINDOW_PS);
        let report = key_report(&cfg, &sift);
        let (y1, e1) = run.true_single_photon(DEFAULT_PAIRING_WINDOW_PS);
        if !report.bounds_invalid && report.y1_lower <= y1 && report.e1_upper >= e1 {
            sound += 1;
        }
        min_sifted = min_sifted.min(sift.sifted_bits);
        worst_fraction = worst_fraction.max((sift.sifting_fraction() - 0.5).abs());
    }
    outcome(
        sound == runs && min_sifted >= 1_000_000 && worst_fraction <= 0.01,
        format!("{sound}/{runs} runs sound, fewest sifted bits {min_sifted}, worst sifting deviation {worst_fraction:.4}"),
    )
}

fn entangled_run(duration: f64, db: f64, offset_ps: i64, seed: u64) -> EntangledRun {
    let local = DetectorConfig {
        background_rate: 0.0,
        ..DetectorConfig::default()
    };
    let source = emit_entangled(&EntangledSourceConfig::default(), duration, seed).unwrap();
    detect_pairs(source, &flat_link(db), &local, &DetectorConfig::default(), offset_ps, seed + 1).unwrap()
}

fn c10_coincidence_matching() -> Outcome {
    let mut worst = 0.0f64;
    let mut all_locked = true;
    for (i, offset) in [-0.999_999_5, -0.123_456_789, 0.000_042, 0.5, 0.987_654_321].into_iter().enumerate() {
        let offset_ps = (offset * 1e12) as i64;
        let run = entangled_run(1.0, -35.0, offset_ps, 1000 + 2 * i as u64);
        let est = match_offset(&run.local, &run.remote, 1.0, 1e-9).unwrap();
        all_locked &= est.locked;
        worst = worst.max((est.offset_seconds() - offset_ps as f64 * 1e-12).abs());
    }
    let a = entangled_run(1.0, -35.0, 0, 1100);
    let b = entangled_run(1.0, -35.0, 0, 1200);
    let independent = match_offset(&a.local, &b.remote, 1.0, 1e-9).unwrap();

    let offset_ps = 123_456_789;
    let small = entangled_run(0.05, -30.0, offset_ps, 1300);
    let est = match_offset(&small.local, &small.remote, 1e-3, 1e-9).unwrap();
    let (span, bin) = (1_000_000_000i64, 1_000i64);
    let mut hist = vec![0u32; (2 * span / bin) as usize];
    for r in small.remote.times() {
        for l in small.local.times() {
            let d = r - l;
            if (-span..span).contains(&d) {
                hist[((d + span) / bin) as usize] += 1;
            }
        }
    }
    let (peak, _) = hist.iter().enumerate().max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i))).unwrap();
    let brute_ok = est.offset_ps == peak as i64 * bin - span;
    outcome(
        all_locked && worst <= 2e-9 && !independent.locked && brute_ok,
        format!(
            "5 offsets locked: {all_locked}, worst error {:.3} ns; independent streams significance {:.2} (locked {}); brute-force peak agrees: {brute_ok}",
            worst * 1e9,
            independent.significance,
            independent.locked
        ),
    )
}

fn c11_entangled_qber() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for v in [0.9, 0.94, 1.0] {
        let cfg = EntangledSourceConfig {
            intrinsic_visibility: v,
            ..EntangledSourceConfig::default()
        };
        let (mut n, mut err) = (0u64, 0u64);
        for p in emit_entangled(&cfg, 1.0, 111).unwrap().take(100_000) {
            if p.local_basis == p.remote_basis {
                n += 1;
                err += u64::from(p.local_bit != p.remote_bit);
            }
        }
        let q = err as f64 / n as f64;
        ok &= (q - (1.0 - v) / 2.0).abs() <= 0.01;
        parts.push(format!("V={v}: {q:.4}"));
    }
    outcome(ok, parts.join(", "))
}

fn c12_data_budgets() -> Outcome {
    let wcp = data_budget(DataSource::Wcp { pulse_rate: 100e6 }, 400.0).unwrap();
    let ent = data_budget(DataSource::Entangled { pair_rate: 5e6 }, 400.0).unwrap();
    let series = backlog_series(&[(3_600.0, wcp / 8.0)], &CommsConfig::default(), 3.0 * SECONDS_PER_DAY).unwrap();
    let single = clearance_times(&series)[0];

    let mut cfg = MissionConfig::default();
    cfg.schedule.pointing_sample_s = 0.0;
    let report = run_mission(&cfg, 3, 12).unwrap();
    let worst = report.scheduled().map(|p| p.backlog_clear_s.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let ok = wcp == 1.6e11 && ent == 4e10 && single.is_some_and(|t| t <= SECONDS_PER_DAY) && worst <= SECONDS_PER_DAY;
    outcome(
        ok,
        format!(
            "WCP 400 s {wcp:.2e} bits, entangled 400 s {ent:.2e} bits; 20 GB backlog clears in {:.2} h; worst over {} mission experiments {:.2} h",
            single.unwrap_or(f64::INFINITY) / 3600.0,
            report.scheduled().count(),
            worst / 3600.0
        ),
    )
}

fn c13_deorbit() -> Outcome {
    let body = SpacecraftBody::default();
    let start = cycle_anchor();
    let mut slowest = 0.0f64;
    let mut life = |alt_km: f64, s: SolarActivity| {
        let t = Instant::now();
        let years = deorbit_lifetime(alt_km * 1e3, &body, s, start).unwrap().years;
        slowest = slowest.max(t.elapsed().as_secs_f64());
        years
    };
    let very_low = life(450.0, SolarActivity::VeryLow);
    let minimum = life(450.0, SolarActivity::ExtendedMinimum);
    let alts = [300.0, 350.0, 400.0, 450.0, 500.0];
    let grid: Vec<Vec<f64>> = alts.iter().map(|a| SolarActivity::ALL.iter().map(|s| life(*a, *s)).collect()).collect();
    let by_solar = grid.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    let by_alt = (0..SolarActivity::ALL.len()).all(|j| grid.windows(2).all(|w| w[1][j] >= w[0][j]));
    outcome(
        (5.0..=20.0).contains(&very_low) && minimum > 25.0 && by_solar && by_alt && slowest <= 60.0,
        format!(
            "450 km: very low {very_low:.2} yr, extended minimum {minimum:.2} yr; monotone in altitude {by_alt}, in activity {by_solar}; slowest scenario {slowest:.2} s"
        ),
    )
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c14_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let quick = repo().join("scenarios/quick.toml");
    let entangled = repo().join("scenarios/entangled.toml");
    let runs = [
        ("passes", &quick),
        ("linkbudget", &quick),
        ("pointing", &quick),
        ("qkd", &quick),
        ("qkd", &entangled),
        ("deorbit", &quick),
        ("mission", &quick),
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (i, (cmd, scenario)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{i}-{cmd}-{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_qlink"))
                .args([*cmd, "--scenario"])
                .arg(scenario)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "2024"])
                .output()
                .unwrap();
            if !status.status.success() {
                failures.push(format!("{cmd} exited {:?}", status.status.code()));
            }
            outputs.push(csv_bytes(&out));
        }
        files += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            failures.push(format!("{cmd} CSVs differ"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} runs, {files} CSV files byte-identical on repeat", runs.len())
        } else {
            failures.join("; ")
        },
    )
}

fn c15_physics_invariants() -> Outcome {
    let s0 = iss_like();
    let still = PropagationSettings::new(SpacecraftBody::default(), SolarActivity::Moderate, false);
    let orbits = 10.0;
    let traj = propagate(s0, still, s0.period() * orbits, 10.0).unwrap();
    let e0 = s0.specific_energy();
    let drift = traj.states.iter().map(|s| ((s.specific_energy() - e0) / e0).abs()).fold(0.0, f64::max) / orbits;

    let days = 2.0;
    let traj = propagate(s0, still, days * SECONDS_PER_DAY, 10.0).unwrap();
    let period = s0.period();
    let mean_raan = |from: f64, to: f64| {
        let (x, y) = traj
            .states
            .iter()
            .filter(|s| s.epoch >= from && s.epoch < to)
            .fold((0.0, 0.0), |(x, y), s| (x + s.raan().cos(), y + s.raan().sin()));
        y.atan2(x)
    };
    let t_end = days * SECONDS_PER_DAY;
    let measured = (mean_raan(t_end - period, t_end) - mean_raan(0.0, period)).to_degrees() / ((t_end - period) / SECONDS_PER_DAY);
    let a = EARTH_EQUATORIAL_RADIUS + 400e3;
    let n = (MU_EARTH / a.powi(3)).sqrt();
    let oracle = (-1.5 * n * J2 * (EARTH_EQUATORIAL_RADIUS / a).powi(2) * 51.6f64.to_radians().cos()).to_degrees() * SECONDS_PER_DAY;
    let nodal = ((measured - oracle) / oracle).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(1515);
    let unit = |rng: &mut ChaCha8Rng| {
        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize()
    };
    let mut eclipse_agree = 0;
    for _ in 0..1000 {
        let sun = unit(&mut rng);
        let p = unit(&mut rng) * rng.random_range(6.5e6..8.0e6_f64);
        let b = p.dot(&sun);
        let disc = b * b - (p.norm_squared() - EARTH_EQUATORIAL_RADIUS * EARTH_EQUATORIAL_RADIUS);
        let hits = disc > 0.0 && (-b - disc.sqrt()) > 0.0;
        eclipse_agree += usize::from(eclipse(&OrbitState::new(0.0, p, Vector3::zeros()), &sun) == hits);
    }

    let mut worst_range = 0.0f64;
    for _ in 0..1000 {
        let station = GroundStation {
            latitude: rng.random_range(-80.0..80.0),
            longitude: rng.random_range(-180.0..180.0),
            altitude: 0.0,
            ..GroundStation::default()
        };
        let obs = Observer::new(station, ScenarioClock::default()).unwrap();
        let epoch = rng.random_range(0.0..SECONDS_PER_DAY);
        let st = obs.station_position(epoch);
        let up = st.normalize();
        let mut d = unit(&mut rng);
        if d.dot(&up) < 0.05 {
            d = (d + up).normalize();
        }
        let h = rng.random_range(250e3..600e3);
        let b = st.dot(&d);
        let range = -b + (b * b - (st.norm_squared() - (EARTH_MEAN_RADIUS + h).powi(2))).sqrt();
        let p = obs.topocentric(&OrbitState::new(epoch, st + range * d, Vector3::zeros()));
        worst_range = worst_range.max((p.slant_range - slant_range_at_elevation(p.elevation, h, EARTH_MEAN_RADIUS)).abs());
    }
    outcome(
        drift <= 1e-9 && nodal <= 0.02 && eclipse_agree == 1000 && worst_range <= 1.0,
        format!(
            "energy drift {drift:.2e}/orbit; nodal rate {measured:.4} vs {oracle:.4} deg/day; eclipse {eclipse_agree}/1000; worst range error {worst_range:.2e} m"
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("pass statistics", c01_pass_statistics),
        ("divergence and spot size", c02_divergence_and_spot),
        ("link loss window", c03_link_loss_window),
        ("ground receiver rate window", c04_ogs_rate_window),
        ("point-ahead and Doppler", c05_point_ahead_and_doppler),
        ("dispersion offset", c06_dispersion),
        ("centroiding precision", c07_centroiding),
        ("fine-pointing target", c08_fine_pointing),
        ("decoy bound soundness", c09_decoy_soundness),
        ("coincidence matching", c10_coincidence_matching),
        ("entangled QBER", c11_entangled_qber),
        ("data budgets", c12_data_budgets),
        ("deorbit brackets", c13_deorbit),
        ("determinism", c14_determinism),
        ("physics invariants", c15_physics_invariants),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} {:>2} {name}: {}", i + 1, o.detail).unwrap();
        out.flush().unwrap();
        if !o.pass {
            failed.push(i + 1);
        }
    }
    writeln!(out, "{} of {} criteria pass", criteria.len() - failed.len(), criteria.len()).unwrap();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
