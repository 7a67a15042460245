use std::fmt::Write as _;

use chrono::{DateTime, Duration, Utc};
use qlink_core::geometry::{Observer, PassEvent, PassFinder, TopoPoint};
use qlink_core::link::{elevation_sweep, LinkBudget};
use qlink_core::mission::{
    expected_pass_key, pass_link, run_mission, MissionConfig, MissionReport, SourceKind, MONTH_S,
};
use qlink_core::orbit::{deorbit_lifetime, Propagator};
use qlink_core::pointing::{jitter_summary_to_loss, simulate_pointing_run, PointingRun};
use qlink_core::quantum::{
    coincidence_qber, detect_pairs, emit_entangled, expected_click_rate, expected_entangled_statistics, key_report,
    match_offset, sift_bb84, simulate_wcp_aggregate, Basis, DetectionRecord, KeyReport, SiftResult,
};
use qlink_core::scenario::{fixed, sci, Scenario, Table};
use qlink_core::ModelError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

/// Tables plus a human-readable summary.
pub struct Output {
    pub tables: Vec<Table>,
    pub summary: String,
}

fn utc(start: DateTime<Utc>, epoch: f64) -> String {
    (start + Duration::milliseconds((epoch * 1e3).round() as i64)).format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

fn opt(x: Option<f64>, decimals: usize) -> String {
    x.map(|v| fixed(v, decimals)).unwrap_or_default()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn basis(b: Basis) -> &'static str {
    match b {
        Basis::Rectilinear => "Z",
        Basis::Diagonal => "X",
    }
}

/// Independent seeds for the stages of one command.
fn seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn config(s: &Scenario) -> Result<MissionConfig, CliError> {
    Ok(s.file.mission_config()?)
}

/// Propagate until the `index`-th (zero-based) night pass has closed.
fn night_pass(cfg: &MissionConfig, months: u32, index: usize) -> Result<PassEvent, CliError> {
    let observer = Observer::new(cfg.station.clone(), cfg.clock())?;
    let horizon = months as f64 * MONTH_S;
    let prop = Propagator::new(cfg.initial_state(), cfg.propagation_settings(), horizon, cfg.schedule.propagation_step_s)?;
    let mut finder = PassFinder::new(&observer, true);
    for state in prop {
        finder.push(&state)?;
        if finder.completed().len() > index {
            return Ok(finder.completed()[index].clone());
        }
    }
    Err(ModelError::InvalidInput {
        name: "qkd.pass_index",
        reason: format!("only {} night passes within run.months", finder.completed().len()),
    }
    .into())
}

fn culmination_point(pass: &PassEvent) -> TopoPoint {
    *pass
        .track
        .iter()
        .max_by(|a, b| a.elevation.total_cmp(&b.elevation))
        .expect("passes have a track")
}

pub fn passes(s: &Scenario) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let months = s.file.run.months;
    let observer = Observer::new(cfg.station.clone(), cfg.clock())?;
    let prop = Propagator::new(
        cfg.initial_state(),
        cfg.propagation_settings(),
        months as f64 * MONTH_S,
        cfg.schedule.propagation_step_s,
    )?;
    let mut finder = PassFinder::new(&observer, false);
    for state in prop {
        finder.push(&state)?;
    }
    let passes = finder.finish();
    let start = cfg.deployment.start;
    let min_el = cfg.schedule.transmission_min_elevation_deg;

    let mut table = Table::new(
        "passes",
        &[
            "index",
            "rise_utc",
            "rise_s",
            "culmination_s",
            "set_s",
            "max_elevation_deg",
            "duration_above_floor_s",
            "time_above_transmission_s",
            "min_range_km",
            "eclipse_throughout",
        ],
    );
    for (i, p) in passes.iter().enumerate() {
        let closest = p.track.iter().map(|t| t.slant_range).fold(f64::INFINITY, f64::min);
        table.push(vec![
            i.to_string(),
            utc(start, p.rise),
            fixed(p.rise, 3),
            fixed(p.culmination, 3),
            fixed(p.set, 3),
            fixed(p.max_elevation, 3),
            fixed(p.duration_above_track_floor, 3),
            fixed(p.time_above(min_el), 3),
            fixed(closest / 1e3, 3),
            flag(p.eclipse_throughout),
        ]);
    }

    let mut monthly = Table::new("months", &["month", "passes", "night_passes", "mean_night_duration_min"]);
    for m in 0..months {
        let (a, b) = (m as f64 * MONTH_S, (m + 1) as f64 * MONTH_S);
        let in_month: Vec<_> = passes.iter().filter(|p| p.culmination >= a && p.culmination < b).collect();
        let night: Vec<_> = in_month.iter().filter(|p| p.eclipse_throughout).collect();
        let mean = night.iter().map(|p| p.duration_above_track_floor).sum::<f64>() / night.len().max(1) as f64;
        monthly.push(vec![
            (m + 1).to_string(),
            in_month.len().to_string(),
            night.len().to_string(),
            fixed(mean / 60.0, 3),
        ]);
    }

    let night: Vec<_> = passes.iter().filter(|p| p.eclipse_throughout).collect();
    let mean_min = night.iter().map(|p| p.duration_above_track_floor).sum::<f64>() / night.len().max(1) as f64 / 60.0;
    let mut summary = String::new();
    writeln!(summary, "station {} over {months} months", cfg.station.name).unwrap();
    writeln!(summary, "passes culminating >= {:.1} deg: {}", cfg.station.min_experiment_culmination, passes.len()).unwrap();
    writeln!(summary, "night passes in eclipse (experiment opportunities): {}", night.len()).unwrap();
    writeln!(summary, "mean opportunity duration above {:.1} deg: {mean_min:.2} min", cfg.station.min_track_elevation).unwrap();
    Ok(Output {
        tables: vec![table, monthly],
        summary,
    })
}

pub fn linkbudget(s: &Scenario) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let hw = &cfg.hardware;
    let alt = cfg.deployment.altitude_m;
    let mut table = Table::new(
        "link_budget",
        &[
            "source",
            "elevation_deg",
            "slant_range_km",
            "ground_spot_m",
            "geometric_db",
            "pointing_db",
            "atmospheric_db",
            "optics_db",
            "total_db",
            "detected_rate_hz",
        ],
    );
    let mut summary = String::new();
    writeln!(summary, "link budget at {:.1} km altitude", alt / 1e3).unwrap();
    for (kind, name) in [(SourceKind::Wcp, "wcp"), (SourceKind::Entangled, "entangled")] {
        let mut h = *hw;
        h.source = kind;
        let optics = h.optics();
        writeln!(
            summary,
            "{name}: divergence half-angle {:.3} urad",
            optics.divergence_half_angle()
        )
        .unwrap();
        for (el, b) in elevation_sweep(optics, alt, &hw.link, &s.file.link.sweep_elevations_deg)? {
            let eta = b.transmission() * hw.detector.efficiency;
            let rate = match kind {
                SourceKind::Wcp => expected_click_rate(&hw.wcp, eta, &hw.detector),
                SourceKind::Entangled => {
                    expected_entangled_statistics(&hw.entangled, eta, &hw.onboard_detector, &hw.detector, hw.pairing_window_ps)
                        .coincidence_rate
                }
            };
            table.push(vec![
                name.to_string(),
                fixed(el, 2),
                fixed(b.slant_range / 1e3, 3),
                fixed(b.ground_spot_diameter, 3),
                fixed(b.diffraction_geometric_loss, 3),
                fixed(b.pointing_loss, 3),
                fixed(b.atmospheric_loss, 3),
                fixed(b.optics_efficiency_loss, 3),
                fixed(b.total, 3),
                sci(rate, 6),
            ]);
            if el == 90.0 {
                writeln!(summary, "  zenith: total {:.2} dB, spot {:.2} m", b.total, b.ground_spot_diameter).unwrap();
            }
        }
    }
    Ok(Output {
        tables: vec![table],
        summary,
    })
}

fn pointing_tables(run: &PointingRun, pass_index: usize, pass: &PassEvent, measured: Option<f64>, analytic: f64) -> Vec<Table> {
    let mut series = Table::new("pointing_series", &["epoch_s", "x_urad", "y_urad", "radial_urad"]);
    for r in &run.residual_error_series {
        series.push(vec![fixed(r.epoch, 4), fixed(r.x, 4), fixed(r.y, 4), fixed(r.radial(), 4)]);
    }
    let mut summary = Table::new(
        "pointing_summary",
        &[
            "pass_index",
            "rise_s",
            "set_s",
            "max_elevation_deg",
            "rms_radial_urad",
            "fraction_within_3urad",
            "open_loop_rms_urad",
            "saturation_events",
            "lock_lost",
            "measured_loss_db",
            "analytic_loss_db",
        ],
    );
    summary.push(vec![
        pass_index.to_string(),
        fixed(pass.rise, 3),
        fixed(pass.set, 3),
        fixed(pass.max_elevation, 3),
        fixed(run.rms_radial, 4),
        fixed(run.fraction_within_3urad, 4),
        fixed(run.open_loop_rms_radial, 4),
        run.bsm_saturation_events.to_string(),
        flag(run.lock_lost),
        opt(measured, 4),
        fixed(analytic, 4),
    ]);
    vec![summary, series]
}

fn run_pointing(cfg: &MissionConfig, pass: &PassEvent, seed: u64) -> Result<(PointingRun, Option<f64>, f64), CliError> {
    let hw = &cfg.hardware;
    let run = simulate_pointing_run(&hw.pointing, pass, seed)?;
    let measured = if run.lock_lost {
        None
    } else {
        Some(jitter_summary_to_loss(&run, hw.optics())?)
    };
    let analytic = pass_link(hw, &culmination_point(pass), None)?.pointing_loss;
    Ok((run, measured, analytic))
}

pub fn pointing(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let index = s.file.qkd.pass_index as usize;
    let pass = night_pass(&cfg, s.file.run.months, index)?;
    let (run, measured, analytic) = run_pointing(&cfg, &pass, seed)?;
    let mut summary = String::new();
    writeln!(
        summary,
        "night pass {index}: max elevation {:.2} deg, {:.1} s above {:.1} deg",
        pass.max_elevation, pass.duration_above_track_floor, cfg.station.min_track_elevation
    )
    .unwrap();
    writeln!(summary, "rms radial residual {:.3} urad (open loop {:.1} urad)", run.rms_radial, run.open_loop_rms_radial).unwrap();
    writeln!(summary, "within 3 urad: {:.1} %", 100.0 * run.fraction_within_3urad).unwrap();
    writeln!(summary, "mirror saturation events {}, lock lost: {}", run.bsm_saturation_events, run.lock_lost).unwrap();
    match measured {
        Some(l) => writeln!(summary, "pointing loss {l:.3} dB measured, {analytic:.3} dB analytic").unwrap(),
        None => writeln!(summary, "no measured pointing loss: lock lost").unwrap(),
    }
    Ok(Output {
        tables: pointing_tables(&run, index, &pass, measured, analytic),
        summary,
    })
}

fn merge_sift(total: &mut SiftResult, part: &SiftResult) {
    for (t, p) in total.per_class.iter_mut().zip(&part.per_class) {
        t.sent += p.sent;
        t.detected += p.detected;
        t.sifted += p.sifted;
        t.errors += p.errors;
    }
    total.detections += part.detections;
    total.paired += part.paired;
    total.sifted_bits += part.sifted_bits;
    total.errors += part.errors;
    total.qber = (total.sifted_bits > 0).then(|| total.errors as f64 / total.sifted_bits as f64);
}

fn events_table(name: &str, records: &[(f64, &DetectionRecord)], cap: u64) -> Table {
    let mut t = Table::new(name.to_string(), &["segment_start_s", "time_ps", "basis", "bit"]);
    'outer: for (start, rec) in records {
        for d in &rec.events {
            if t.rows.len() as u64 >= cap {
                break 'outer;
            }
            t.push(vec![fixed(*start, 3), d.time_ps.to_string(), basis(d.basis).to_string(), flag(d.bit)]);
        }
    }
    t
}

fn key_row(t: &mut Table, method: &str, duration: f64, r: &KeyReport) {
    t.push(vec![
        method.to_string(),
        fixed(duration, 3),
        r.sent_pulses.to_string(),
        r.sifted_bits.to_string(),
        opt(r.qber, 6),
        sci(r.y1_lower, 6),
        fixed(r.e1_upper, 6),
        fixed(r.secure_key_length, 1),
        flag(r.bounds_invalid),
    ]);
}

const KEY_HEADERS: [&str; 9] = [
    "method",
    "duration_s",
    "sent",
    "sifted_bits",
    "qber",
    "y1_lower",
    "e1_upper",
    "secure_bits",
    "bounds_invalid",
];

pub fn qkd(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let hw = &cfg.hardware;
    let q = &s.file.qkd;
    let index = q.pass_index as usize;
    let pass = night_pass(&cfg, s.file.run.months, index)?;
    let stage = seeds(seed, 3);
    let (run, measured, analytic) = run_pointing(&cfg, &pass, stage[0])?;
    let Some(loss) = measured else {
        return Err(ModelError::PointingLockLost.into());
    };
    let window: Vec<TopoPoint> = pass.above(cfg.schedule.transmission_min_elevation_deg).copied().collect();
    if window.len() < 2 {
        return Err(ModelError::InvalidInput {
            name: "schedule.transmission_min_elevation_deg",
            reason: "selected pass has no transmission window".into(),
        }
        .into());
    }
    let window_s = window.last().unwrap().epoch - window[0].epoch;
    let culmination = pass_link(hw, &culmination_point(&pass), Some(loss))?;
    let expected = expected_pass_key(hw, &window, Some(loss))?;

    let mut tables = pointing_tables(&run, index, &pass, measured, analytic);
    tables.remove(1);
    let mut keys = Table::new("key", &KEY_HEADERS);
    let mut summary = String::new();
    writeln!(
        summary,
        "night pass {index}: max elevation {:.2} deg, transmission window {window_s:.1} s",
        pass.max_elevation
    )
    .unwrap();
    writeln!(
        summary,
        "culmination link {:.2} dB (pointing {:.3} dB measured, rms {:.3} urad)",
        culmination.total, loss, run.rms_radial
    )
    .unwrap();

    match hw.source {
        SourceKind::Wcp => {
            let mut segments = Table::new(
                "segments",
                &["start_s", "duration_s", "elevation_deg", "link_db", "detections", "sifted_bits", "errors"],
            );
            let mut total = SiftResult::default();
            let mut records = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(stage[1]);
            for pair in window.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                let mid = if a.elevation >= b.elevation { a } else { b };
                let link: LinkBudget = pass_link(hw, mid, Some(loss))?;
                let sim = simulate_wcp_aggregate(&hw.wcp, b.epoch - a.epoch, &link, &hw.detector, rng.random())?;
                let sift = sift_bb84(&sim.sent, &sim.record, hw.pairing_window_ps);
                segments.push(vec![
                    fixed(a.epoch, 3),
                    fixed(b.epoch - a.epoch, 3),
                    fixed(mid.elevation, 3),
                    fixed(link.total, 3),
                    sift.detections.to_string(),
                    sift.sifted_bits.to_string(),
                    sift.errors.to_string(),
                ]);
                merge_sift(&mut total, &sift);
                records.push((a.epoch, sim.record));
            }
            let report = key_report(&hw.wcp, &total);
            key_row(&mut keys, "simulated", window_s, &report);
            key_row(&mut keys, "expected", window_s, &expected.report);
            writeln!(
                summary,
                "simulated: {} detections, {} sifted bits, QBER {}, secure bits {:.0}",
                total.detections,
                total.sifted_bits,
                opt(total.qber, 4),
                report.secure_key_length
            )
            .unwrap();
            let refs: Vec<(f64, &DetectionRecord)> = records.iter().map(|(t, r)| (*t, r)).collect();
            tables.push(segments);
            tables.push(keys);
            tables.push(events_table("events", &refs, q.max_event_rows));
        }
        SourceKind::Entangled => {
            let offset_ps = (q.clock_offset_ms * 1e9).round() as i64;
            let emitter = emit_entangled(&hw.entangled, q.entangled_sample_s, stage[1])?;
            let ent = detect_pairs(emitter, &culmination, &hw.onboard_detector, &hw.detector, offset_ps, stage[2])?;
            let est = match_offset(&ent.local, &ent.remote, q.search_span_s, q.correlation_bin_ns / 1e9)?;
            let co = coincidence_qber(&ent.local, &ent.remote, est.offset_rounded_ps(), hw.pairing_window_ps);
            let mut offset = Table::new(
                "offset",
                &["inserted_ps", "recovered_ps", "error_ps", "significance", "peak_counts", "locked"],
            );
            let recovered = est.offset_rounded_ps();
            offset.push(vec![
                offset_ps.to_string(),
                recovered.to_string(),
                (recovered - offset_ps).to_string(),
                fixed(est.significance, 3),
                est.peak_counts.to_string(),
                flag(est.locked),
            ]);
            let mut coinc = Table::new(
                "coincidences",
                &[
                    "duration_s",
                    "coincidences",
                    "same_basis",
                    "errors",
                    "qber",
                    "coincidence_rate_hz",
                    "accidental_rate_hz",
                ],
            );
            coinc.push(vec![
                fixed(co.duration, 6),
                co.coincidences.to_string(),
                co.same_basis.to_string(),
                co.errors.to_string(),
                opt(co.qber, 6),
                sci(co.coincidence_rate, 6),
                sci(co.accidental_rate, 6),
            ]);
            let sample = KeyReport {
                sent_pulses: ent.pairs_emitted,
                sifted_bits: co.same_basis,
                qber: co.qber,
                y1_lower: f64::NAN,
                e1_upper: f64::NAN,
                secure_key_length: co.qber.map_or(0.0, |qb| {
                    co.same_basis as f64
                        * (1.0 - (1.0 + qlink_core::quantum::ERROR_CORRECTION_EFFICIENCY) * qlink_core::quantum::binary_entropy(qb)).max(0.0)
                }),
                bounds_invalid: !est.locked,
            };
            key_row(&mut keys, "simulated_sample", q.entangled_sample_s, &sample);
            key_row(&mut keys, "expected", window_s, &expected.report);
            writeln!(
                summary,
                "clock offset inserted {offset_ps} ps, recovered {recovered} ps, locked {} (significance {:.1})",
                est.locked, est.significance
            )
            .unwrap();
            writeln!(
                summary,
                "sample of {:.3} s: {} same-basis coincidences, QBER {}",
                q.entangled_sample_s,
                co.same_basis,
                opt(co.qber, 4)
            )
            .unwrap();
            let remote = ent.remote.shifted(-recovered);
            tables.push(offset);
            tables.push(coinc);
            tables.push(keys);
            tables.push(events_table("events", &[(0.0, &remote)], q.max_event_rows));
        }
    }
    writeln!(summary, "expected over the window: secure bits {:.0}", expected.report.secure_key_length).unwrap();
    Ok(Output { tables, summary })
}

pub fn deorbit(s: &Scenario) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let d = &s.file.deorbit;
    let mut lifetimes = Table::new("lifetimes", &["activity", "initial_altitude_km", "lifetime_years", "capped"]);
    let mut profiles = Table::new("profiles", &["activity", "day", "altitude_km"]);
    let mut summary = String::new();
    let stride = d.profile_stride_days as f64 * 86_400.0;
    for activity in s.file.deorbit_activities()? {
        let est = deorbit_lifetime(d.initial_altitude_km * 1e3, &cfg.body, activity, cfg.deployment.start)?;
        lifetimes.push(vec![
            activity.name().to_string(),
            fixed(d.initial_altitude_km, 3),
            fixed(est.years, 4),
            flag(est.capped),
        ]);
        let mut next = 0.0;
        for (i, &(t, h)) in est.profile.iter().enumerate() {
            if t >= next || i + 1 == est.profile.len() {
                profiles.push(vec![activity.name().to_string(), fixed(t / 86_400.0, 3), fixed(h / 1e3, 3)]);
                next = t + stride;
            }
        }
        let cap = if est.capped { " (capped)" } else { "" };
        writeln!(summary, "{}: {:.2} years from {:.1} km{cap}", activity.name(), est.years, d.initial_altitude_km).unwrap();
    }
    Ok(Output {
        tables: vec![lifetimes, profiles],
        summary,
    })
}

pub fn mission_tables(report: &MissionReport, start: DateTime<Utc>) -> Vec<Table> {
    let mut months = Table::new(
        "months",
        &["month", "start_utc", "opportunities", "scheduled", "mean_duration_s", "mean_window_s", "mean_altitude_km"],
    );
    for m in &report.months {
        months.push(vec![
            m.month.to_string(),
            utc(start, m.start_epoch),
            m.opportunities.to_string(),
            m.scheduled.to_string(),
            fixed(m.mean_duration_s, 3),
            fixed(m.mean_window_s, 3),
            fixed(m.mean_altitude_m / 1e3, 3),
        ]);
    }
    let mut passes = Table::new(
        "passes",
        &[
            "index",
            "rise_utc",
            "rise_s",
            "culmination_s",
            "set_s",
            "max_elevation_deg",
            "duration_s",
            "window_s",
            "altitude_km",
            "clear_weather",
            "scheduled",
            "power_limited",
            "depth_of_discharge",
            "pointing_rms_urad",
            "pointing_loss_db",
            "lock_lost",
            "culmination_link_db",
            "culmination_rate_hz",
            "sifted_bits",
            "qber",
            "secure_bits",
            "data_bytes",
            "backlog_clear_s",
        ],
    );
    for p in &report.passes {
        passes.push(vec![
            p.index.to_string(),
            utc(start, p.rise),
            fixed(p.rise, 3),
            fixed(p.culmination, 3),
            fixed(p.set, 3),
            fixed(p.max_elevation, 3),
            fixed(p.duration_s, 3),
            fixed(p.window_s, 3),
            fixed(p.altitude_m / 1e3, 3),
            flag(p.clear_weather),
            flag(p.scheduled),
            flag(p.power_limited),
            fixed(p.depth_of_discharge, 4),
            opt(p.pointing_rms_urad, 4),
            opt(p.pointing_loss_db, 4),
            flag(p.lock_lost),
            opt(p.culmination_link_db, 3),
            p.culmination_rate.map(|r| sci(r, 6)).unwrap_or_default(),
            p.key.map(|k| k.sifted_bits.to_string()).unwrap_or_default(),
            opt(p.key.and_then(|k| k.qber), 6),
            p.key.map(|k| fixed(k.secure_key_length, 1)).unwrap_or_default(),
            fixed(p.data_bytes, 0),
            opt(p.backlog_clear_s, 3),
        ]);
    }
    let mut altitude = Table::new("altitude", &["epoch_s", "utc", "altitude_km"]);
    for a in &report.altitude_profile {
        altitude.push(vec![fixed(a.epoch, 1), utc(start, a.epoch), fixed(a.altitude_m / 1e3, 4)]);
    }
    let mut backlog = Table::new("backlog", &["epoch_s", "generated_bytes", "downlink_capacity_bytes", "backlog_bytes"]);
    for b in &report.backlog {
        backlog.push(vec![
            fixed(b.epoch, 3),
            fixed(b.generated_bytes, 0),
            fixed(b.downlink_capacity_bytes, 0),
            fixed(b.backlog_bytes, 0),
        ]);
    }
    vec![months, passes, altitude, backlog]
}

pub fn mission(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let cfg = config(s)?;
    let report = run_mission(&cfg, s.file.run.months, seed)?;
    let scheduled: Vec<_> = report.scheduled().collect();
    let lock_lost = scheduled.iter().filter(|p| p.lock_lost).count();
    let worst_clear = scheduled.iter().filter_map(|p| p.backlog_clear_s).fold(0.0, f64::max);
    let uncleared = scheduled.iter().filter(|p| p.backlog_clear_s.is_none()).count();
    let mut summary = String::new();
    writeln!(summary, "{} months from {:.1} km", s.file.run.months, cfg.deployment.altitude_m / 1e3).unwrap();
    writeln!(summary, "experiment opportunities: {}", report.opportunities()).unwrap();
    writeln!(summary, "scheduled experiments: {} ({lock_lost} lost pointing lock)", scheduled.len()).unwrap();
    writeln!(summary, "secure bits: {:.4e}", report.total_secure_bits()).unwrap();
    writeln!(summary, "longest backlog clearance: {:.2} h ({uncleared} not cleared)", worst_clear / 3600.0).unwrap();
    match report.end_of_experiments {
        Some(t) => writeln!(summary, "experiments ended on decay at {:.1} days", t / 86_400.0).unwrap(),
        None => writeln!(summary, "orbit stayed above {:.0} km", cfg.schedule.end_altitude_m / 1e3).unwrap(),
    }
    Ok(Output {
        tables: mission_tables(&report, cfg.deployment.start),
        summary,
    })
}
