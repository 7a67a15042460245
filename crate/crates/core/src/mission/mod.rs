//! Whole-mission runs: pass opportunities as the orbit decays, experiment
//! scheduling, per-pass key yield, onboard data backlog and battery use.

mod budget;

pub use budget::{
    backlog_series, clearance_times, data_budget, energy_budget, BacklogSample, CommsConfig, DataSource, EnergyCheck,
    PowerConfig, TIMESTAMP_BITS_PER_EVENT, WCP_BITS_PER_PULSE,
};

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{SECONDS_PER_DAY, SECONDS_PER_YEAR};
use crate::error::{ModelError, Result};
use crate::geometry::{GroundStation, Observer, PassEvent, PassFinder, TopoPoint, MAX_PASS_CADENCE_S};
use crate::link::{link_budget, LinkBudget, LinkParameters, OpticalSourceGeometry};
use crate::orbit::{OrbitState, PropagationSettings, Propagator, SolarActivity, SpacecraftBody};
use crate::pointing::{jitter_summary_to_loss, simulate_pointing_run, PointingConfig};
use crate::quantum::{
    decoy_key_rate, expected_click_rate, expected_entangled_statistics, expected_wcp_statistics, DetectorConfig,
    EntangledSourceConfig, KeyReport, WcpSourceConfig, DEFAULT_PAIRING_WINDOW_PS,
};
use crate::time::ScenarioClock;

pub const MONTH_S: f64 = SECONDS_PER_YEAR / 12.0;
pub const MIN_DEPLOYMENT_ALTITUDE_M: f64 = 300e3;
pub const MAX_DEPLOYMENT_ALTITUDE_M: f64 = 500e3;
const PROFILE_SPACING_S: f64 = 3_600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Wcp,
    Entangled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    /// Above the equatorial radius, m.
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub start: DateTime<Utc>,
}

impl Default for Deployment {
    /// ISS-like release at the start of 2018.
    fn default() -> Self {
        Self {
            altitude_m: 400e3,
            inclination_deg: 51.6,
            raan_deg: 0.0,
            start: ScenarioClock::default().start(),
        }
    }
}

impl Deployment {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_DEPLOYMENT_ALTITUDE_M..=MAX_DEPLOYMENT_ALTITUDE_M).contains(&self.altitude_m) {
            return Err(ModelError::AltitudeOutOfRange {
                altitude_m: self.altitude_m,
                min_m: MIN_DEPLOYMENT_ALTITUDE_M,
                max_m: MAX_DEPLOYMENT_ALTITUDE_M,
            });
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(ModelError::invalid("inclination_deg", "must lie in [0, 180]"));
        }
        if !self.raan_deg.is_finite() {
            return Err(ModelError::invalid("raan_deg", "must be finite"));
        }
        Ok(())
    }
}

/// Payload, ground receiver and pointing chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    pub source: SourceKind,
    pub wcp_optics: OpticalSourceGeometry,
    pub entangled_optics: OpticalSourceGeometry,
    pub wcp: WcpSourceConfig,
    pub entangled: EntangledSourceConfig,
    /// Ground receiver.
    pub detector: DetectorConfig,
    /// On-board arm of the entangled source.
    pub onboard_detector: DetectorConfig,
    pub pointing: PointingConfig,
    pub link: LinkParameters,
    /// Half-width of the slot-pairing and coincidence windows, ps.
    pub pairing_window_ps: i64,
}

impl Default for Hardware {
    fn default() -> Self {
        Self {
            source: SourceKind::Wcp,
            wcp_optics: OpticalSourceGeometry::wcp(),
            entangled_optics: OpticalSourceGeometry::entangled(),
            wcp: WcpSourceConfig::default(),
            entangled: EntangledSourceConfig::default(),
            detector: DetectorConfig::default(),
            onboard_detector: DetectorConfig {
                background_rate: 0.0,
                ..DetectorConfig::default()
            },
            pointing: PointingConfig::default(),
            link: LinkParameters::default(),
            pairing_window_ps: DEFAULT_PAIRING_WINDOW_PS,
        }
    }
}

impl Hardware {
    pub fn validate(&self) -> Result<()> {
        self.wcp_optics.validate()?;
        self.entangled_optics.validate()?;
        self.wcp.validate()?;
        self.entangled.validate()?;
        self.detector.validate()?;
        self.onboard_detector.validate()?;
        self.pointing.validate()?;
        self.link.validate()?;
        if self.pairing_window_ps <= 0 {
            return Err(ModelError::invalid("pairing_window_ps", "must be positive"));
        }
        Ok(())
    }

    /// Transmit optics of the selected source.
    pub fn optics(&self) -> &OpticalSourceGeometry {
        match self.source {
            SourceKind::Wcp => &self.wcp_optics,
            SourceKind::Entangled => &self.entangled_optics,
        }
    }

    pub fn data_source(&self) -> DataSource {
        match self.source {
            SourceKind::Wcp => DataSource::Wcp {
                pulse_rate: self.wcp.pulse_rate,
            },
            SourceKind::Entangled => DataSource::Entangled {
                pair_rate: self.entangled.pair_rate,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Chance that a qualifying pass has clear sky.
    pub clear_weather_probability: f64,
    /// Quantum transmission only above this elevation, degrees.
    pub transmission_min_elevation_deg: f64,
    pub propagation_step_s: f64,
    /// Experiments stop once the orbit decays below this, m.
    pub end_altitude_m: f64,
    /// Length of the closed-loop pointing run centred on culmination, s.
    /// Zero uses the analytic jitter model of the link parameters instead.
    pub pointing_sample_s: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            clear_weather_probability: 0.5,
            transmission_min_elevation_deg: 30.0,
            propagation_step_s: 10.0,
            end_altitude_m: 300e3,
            pointing_sample_s: 10.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.clear_weather_probability) {
            return Err(ModelError::invalid("clear_weather_probability", "must lie in [0, 1]"));
        }
        if !(0.0..90.0).contains(&self.transmission_min_elevation_deg) {
            return Err(ModelError::invalid("transmission_min_elevation_deg", "must lie in [0, 90)"));
        }
        if !(self.propagation_step_s > 0.0 && self.propagation_step_s <= MAX_PASS_CADENCE_S) {
            return Err(ModelError::CadenceTooCoarse {
                cadence_s: self.propagation_step_s,
                limit_s: MAX_PASS_CADENCE_S,
            });
        }
        if !(self.end_altitude_m > 0.0) {
            return Err(ModelError::invalid("end_altitude_m", "must be positive"));
        }
        if !(self.pointing_sample_s >= 0.0 && self.pointing_sample_s.is_finite()) {
            return Err(ModelError::invalid("pointing_sample_s", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub deployment: Deployment,
    pub body: SpacecraftBody,
    pub solar: SolarActivity,
    pub station: GroundStation,
    pub hardware: Hardware,
    pub comms: CommsConfig,
    pub power: PowerConfig,
    pub schedule: Schedule,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            deployment: Deployment::default(),
            body: SpacecraftBody::default(),
            solar: SolarActivity::VeryLow,
            station: GroundStation::default(),
            hardware: Hardware::default(),
            comms: CommsConfig::default(),
            power: PowerConfig::default(),
            schedule: Schedule::default(),
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        self.body.validate()?;
        self.station.validate()?;
        self.hardware.validate()?;
        self.comms.validate()?;
        self.power.validate()?;
        self.schedule.validate()
    }

    pub fn clock(&self) -> ScenarioClock {
        ScenarioClock::new(self.deployment.start)
    }

    pub fn initial_state(&self) -> OrbitState {
        let d = &self.deployment;
        OrbitState::circular(0.0, d.altitude_m, d.inclination_deg, d.raan_deg, 0.0)
    }

    pub fn propagation_settings(&self) -> PropagationSettings {
        PropagationSettings::new(self.body, self.solar, true).with_clock(self.clock())
    }
}

/// Expected yield of one transmission window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassKey {
    pub report: KeyReport,
    /// Budget at the highest window point, with the pointing term used.
    pub culmination_link: LinkBudget,
    /// Ground click rate at that point, s⁻¹.
    pub culmination_rate: f64,
}

struct PointRates {
    sent: f64,
    sifted: f64,
    errors: f64,
    key: f64,
    clicks: f64,
    y1: f64,
    e1: f64,
    invalid: bool,
}

fn point_rates(hw: &Hardware, link: &LinkBudget) -> PointRates {
    let eta = link.transmission() * hw.detector.efficiency;
    match hw.source {
        SourceKind::Wcp => {
            let cfg = &hw.wcp;
            let s = expected_wcp_statistics(cfg, eta, &hw.detector, hw.pairing_window_ps);
            let bounds = decoy_key_rate(&s);
            let half = 0.5 * cfg.pulse_rate;
            let (fs, fd, fv) = (cfg.signal_fraction, cfg.decoy_fraction, cfg.vacuum_fraction);
            PointRates {
                sent: cfg.pulse_rate,
                sifted: half * (fs * s.q_mu + fd * s.q_nu + fv * s.q_vac),
                errors: half * (fs * s.q_mu * s.e_mu + fd * s.q_nu * s.e_nu + fv * s.q_vac * 0.5),
                key: half * fs * bounds.key_fraction,
                clicks: expected_click_rate(cfg, eta, &hw.detector),
                y1: bounds.y1_lower,
                e1: bounds.e1_upper,
                invalid: !bounds.valid,
            }
        }
        SourceKind::Entangled => {
            let cfg = &hw.entangled;
            let s = expected_entangled_statistics(cfg, eta, &hw.onboard_detector, &hw.detector, hw.pairing_window_ps);
            let sifted = 0.5 * (s.coincidence_rate + s.accidental_rate);
            PointRates {
                sent: cfg.pair_rate,
                sifted,
                errors: sifted * s.qber,
                key: sifted * s.key_fraction,
                clicks: s.remote_rate,
                y1: cfg.heralding_efficiency_local * eta,
                e1: s.qber,
                invalid: false,
            }
        }
    }
}

/// Link budget at `point`, optionally replacing the analytic pointing term
/// with a measured one.
pub fn pass_link(hw: &Hardware, point: &TopoPoint, pointing_loss_db: Option<f64>) -> Result<LinkBudget> {
    let mut b = link_budget(hw.optics(), point, &hw.link)?;
    if let Some(loss) = pointing_loss_db {
        b.total += loss - b.pointing_loss;
        b.pointing_loss = loss;
    }
    Ok(b)
}

/// Expected key accounting over the window samples (time order), integrated
/// with the trapezoid rule.
pub fn expected_pass_key(hw: &Hardware, window: &[TopoPoint], pointing_loss_db: Option<f64>) -> Result<PassKey> {
    let Some(top) = window.iter().max_by(|a, b| a.elevation.total_cmp(&b.elevation)) else {
        return Err(ModelError::invalid("window", "must contain at least one point"));
    };
    let rates = window
        .iter()
        .map(|p| pass_link(hw, p, pointing_loss_db).map(|l| point_rates(hw, &l)))
        .collect::<Result<Vec<_>>>()?;
    let (mut sent, mut sifted, mut errors, mut key) = (0.0, 0.0, 0.0, 0.0);
    for (w, r) in window.windows(2).zip(rates.windows(2)) {
        let dt = 0.5 * (w[1].epoch - w[0].epoch);
        sent += dt * (r[0].sent + r[1].sent);
        sifted += dt * (r[0].sifted + r[1].sifted);
        errors += dt * (r[0].errors + r[1].errors);
        key += dt * (r[0].key + r[1].key);
    }
    let culmination_link = pass_link(hw, top, pointing_loss_db)?;
    let peak = point_rates(hw, &culmination_link);
    Ok(PassKey {
        report: KeyReport {
            sent_pulses: sent.round() as u64,
            sifted_bits: sifted.round() as u64,
            qber: (sifted > 0.0).then(|| errors / sifted),
            y1_lower: peak.y1,
            e1_upper: peak.e1,
            secure_key_length: key,
            bounds_invalid: peak.invalid,
        },
        culmination_link,
        culmination_rate: peak.clicks,
    })
}

/// The part of `pass` within `half_width` seconds of culmination, with the
/// track points that bracket it.
pub fn culmination_segment(pass: &PassEvent, half_width: f64) -> PassEvent {
    let rise = (pass.culmination - half_width).max(pass.rise);
    let set = (pass.culmination + half_width).min(pass.set);
    let track = pass
        .track
        .iter()
        .filter(|p| p.epoch >= rise - MAX_PASS_CADENCE_S && p.epoch <= set + MAX_PASS_CADENCE_S)
        .copied()
        .collect();
    PassEvent {
        rise,
        culmination: pass.culmination,
        set,
        max_elevation: pass.max_elevation,
        duration_above_track_floor: set - rise,
        eclipse_throughout: pass.eclipse_throughout,
        track,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonthSummary {
    pub month: u32,
    pub start_epoch: f64,
    pub opportunities: u32,
    pub scheduled: u32,
    /// Mean time above the tracking floor, s; zero without passes.
    pub mean_duration_s: f64,
    pub mean_window_s: f64,
    pub mean_altitude_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AltitudeSample {
    pub epoch: f64,
    pub altitude_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassSummary {
    pub index: usize,
    pub rise: f64,
    pub culmination: f64,
    pub set: f64,
    pub max_elevation: f64,
    pub duration_s: f64,
    /// Time above the transmission elevation, s.
    pub window_s: f64,
    pub altitude_m: f64,
    pub clear_weather: bool,
    pub scheduled: bool,
    /// Clear sky but the battery could not cover the pass.
    pub power_limited: bool,
    pub depth_of_discharge: f64,
    pub pointing_rms_urad: Option<f64>,
    pub pointing_loss_db: Option<f64>,
    pub lock_lost: bool,
    pub culmination_link_db: Option<f64>,
    pub culmination_rate: Option<f64>,
    pub key: Option<KeyReport>,
    pub data_bytes: f64,
    pub backlog_clear_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub months: Vec<MonthSummary>,
    pub passes: Vec<PassSummary>,
    pub altitude_profile: Vec<AltitudeSample>,
    pub backlog: Vec<BacklogSample>,
    /// When the orbit fell below the experiment floor, s.
    pub end_of_experiments: Option<f64>,
    pub simulated_until: f64,
}

impl MissionReport {
    pub fn opportunities(&self) -> usize {
        self.passes.len()
    }

    pub fn scheduled(&self) -> impl Iterator<Item = &PassSummary> {
        self.passes.iter().filter(|p| p.scheduled)
    }

    pub fn total_secure_bits(&self) -> f64 {
        self.scheduled().filter_map(|p| p.key.map(|k| k.secure_key_length)).sum()
    }
}

fn altitude_at(profile: &[AltitudeSample], epoch: f64) -> f64 {
    let i = profile.partition_point(|s| s.epoch <= epoch);
    match (i.checked_sub(1).map(|j| profile[j]), profile.get(i)) {
        (Some(a), Some(b)) => a.altitude_m + (b.altitude_m - a.altitude_m) * (epoch - a.epoch) / (b.epoch - a.epoch),
        (Some(a), None) => a.altitude_m,
        (None, Some(b)) => b.altitude_m,
        (None, None) => f64::NAN,
    }
}

/// Run `months` of mission from deployment.
///
/// Experiment opportunities are night passes flown in eclipse that
/// culminate above the station threshold. Each gets a clear-sky draw, then a
/// battery check, and a scheduled pass runs a closed-loop pointing sample
/// at culmination and the expected-key integration over its transmission
/// window.
pub fn run_mission(config: &MissionConfig, months: u32, seed: u64) -> Result<MissionReport> {
    config.validate()?;
    if months == 0 {
        return Err(ModelError::invalid("months", "must be at least 1"));
    }
    let schedule = &config.schedule;
    let hw = &config.hardware;
    let observer = Observer::new(config.station.clone(), config.clock())?;
    let horizon = months as f64 * MONTH_S;
    let propagator = Propagator::new(
        config.initial_state(),
        config.propagation_settings(),
        horizon,
        schedule.propagation_step_s,
    )?;

    let mut finder = PassFinder::new(&observer, true);
    let mut profile = Vec::new();
    let mut end_of_experiments = None;
    let mut simulated_until = 0.0;
    for state in propagator {
        if state.altitude() < schedule.end_altitude_m {
            end_of_experiments = Some(state.epoch);
            break;
        }
        if profile.last().is_none_or(|s: &AltitudeSample| state.epoch - s.epoch >= PROFILE_SPACING_S) {
            profile.push(AltitudeSample {
                epoch: state.epoch,
                altitude_m: state.altitude(),
            });
        }
        finder.push(&state)?;
        simulated_until = state.epoch;
    }
    let passes = finder.finish();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summaries = Vec::with_capacity(passes.len());
    let mut experiments = Vec::new();
    let (mut dod, mut last_epoch) = (0.0f64, 0.0f64);
    for (index, pass) in passes.iter().enumerate() {
        let clear_weather = rng.random_bool(schedule.clear_weather_probability);
        let pass_seed: u64 = rng.random();
        let window: Vec<TopoPoint> = pass.above(schedule.transmission_min_elevation_deg).copied().collect();
        let energy = energy_budget(&config.power, pass.duration_above_track_floor)?;
        let recovered = config.power.surplus_w() * (pass.rise - last_epoch) / 3600.0 / config.power.battery_wh;
        let available = (dod - recovered).max(0.0);
        let power_ok = available + energy.depth_of_discharge <= config.power.depth_of_discharge_limit;
        let scheduled = clear_weather && power_ok && window.len() >= 2;

        let mut summary = PassSummary {
            index,
            rise: pass.rise,
            culmination: pass.culmination,
            set: pass.set,
            max_elevation: pass.max_elevation,
            duration_s: pass.duration_above_track_floor,
            window_s: pass.time_above(schedule.transmission_min_elevation_deg),
            altitude_m: altitude_at(&profile, pass.culmination),
            clear_weather,
            scheduled,
            power_limited: clear_weather && !power_ok,
            depth_of_discharge: energy.depth_of_discharge,
            pointing_rms_urad: None,
            pointing_loss_db: None,
            lock_lost: false,
            culmination_link_db: None,
            culmination_rate: None,
            key: None,
            data_bytes: 0.0,
            backlog_clear_s: None,
        };
        if scheduled {
            dod = available + energy.depth_of_discharge;
            last_epoch = pass.set;
            let mut measured_loss = None;
            if schedule.pointing_sample_s > 0.0 {
                let segment = culmination_segment(pass, 0.5 * schedule.pointing_sample_s);
                let run = simulate_pointing_run(&hw.pointing, &segment, pass_seed)?;
                summary.pointing_rms_urad = Some(run.rms_radial);
                summary.lock_lost = run.lock_lost;
                if !run.lock_lost {
                    measured_loss = Some(jitter_summary_to_loss(&run, hw.optics())?);
                }
            }
            if !summary.lock_lost {
                let key = expected_pass_key(hw, &window, measured_loss)?;
                summary.pointing_loss_db = Some(key.culmination_link.pointing_loss);
                summary.culmination_link_db = Some(key.culmination_link.total);
                summary.culmination_rate = Some(key.culmination_rate);
                summary.key = Some(key.report);
            }
            summary.data_bytes = data_budget(hw.data_source(), summary.window_s)? / 8.0;
            experiments.push((pass.set, summary.data_bytes));
        }
        summaries.push(summary);
    }

    let backlog = backlog_series(&experiments, &config.comms, simulated_until + 2.0 * SECONDS_PER_DAY)?;
    let clear = clearance_times(&backlog);
    for (summary, t) in summaries.iter_mut().filter(|s| s.scheduled).zip(clear) {
        summary.backlog_clear_s = t;
    }

    let month_count = ((simulated_until / MONTH_S).floor() as u32 + 1).min(months);
    let months = (0..month_count)
        .map(|m| {
            let (start, stop) = (m as f64 * MONTH_S, (m + 1) as f64 * MONTH_S);
            let in_month: Vec<&PassSummary> =
                summaries.iter().filter(|p| p.culmination >= start && p.culmination < stop).collect();
            let mean = |f: &dyn Fn(&PassSummary) -> f64| {
                if in_month.is_empty() {
                    0.0
                } else {
                    in_month.iter().map(|p| f(p)).sum::<f64>() / in_month.len() as f64
                }
            };
            let alts: Vec<f64> =
                profile.iter().filter(|s| s.epoch >= start && s.epoch < stop).map(|s| s.altitude_m).collect();
            MonthSummary {
                month: m + 1,
                start_epoch: start,
                opportunities: in_month.len() as u32,
                scheduled: in_month.iter().filter(|p| p.scheduled).count() as u32,
                mean_duration_s: mean(&|p| p.duration_s),
                mean_window_s: mean(&|p| p.window_s),
                mean_altitude_m: alts.iter().sum::<f64>() / alts.len().max(1) as f64,
            }
        })
        .collect();

    Ok(MissionReport {
        months,
        passes: summaries,
        altitude_profile: profile,
        backlog,
        end_of_experiments,
        simulated_until,
    })
}
