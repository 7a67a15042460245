use std::path::Path;

use chrono::{NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::ScenarioError;
use crate::geometry::GroundStation;
use crate::link::{AtmosphereModel, BeamShape, LinkParameters, OpticalSourceGeometry};
use crate::mission::{CommsConfig, Deployment, Hardware, MissionConfig, PowerConfig, Schedule, SourceKind};
use crate::orbit::{SolarActivity, SpacecraftBody};
use crate::pointing::{BeaconTrackerModel, CoarsePointingModel, PointingConfig, SteeringModel};
use crate::quantum::{DetectorConfig, EntangledSourceConfig, WcpSourceConfig};

pub const SCENARIO_VERSION: i64 = 1;

/// The shipped reference scenario; every key at its default.
pub const REFERENCE_SCENARIO: &str = include_str!("../../../../scenarios/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub months: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentSection {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    /// UTC calendar date, YYYY-MM-DD.
    pub start_date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacecraftSection {
    pub mass_kg: f64,
    pub min_drag_area_m2: f64,
    pub drag_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarSection {
    pub activity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSection {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
    pub min_track_elevation_deg: f64,
    pub min_experiment_culmination_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    /// "flat_top" or "gaussian".
    pub beam: String,
    /// Used by flat_top beams.
    pub aperture_diameter_m: f64,
    /// Used by gaussian beams.
    pub waist_radius_m: f64,
    pub wavelength_nm: f64,
    pub telescope_aperture_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    /// "wcp" or "entangled".
    pub source: String,
    pub receiver_diameter_m: f64,
    pub jitter_sigma_urad: f64,
    pub optics_efficiency: f64,
    pub atmosphere_transmittance_800nm_at_20deg: f64,
    pub atmosphere_wavelength_exponent: f64,
    pub sweep_elevations_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointingSection {
    pub coarse_bias_urad: f64,
    pub coarse_sigma_urad: f64,
    pub coarse_drift_timescale_s: f64,
    pub buffeting_amplitude_urad: f64,
    pub pixel_pitch_urad: f64,
    pub frame_rate_hz: f64,
    pub psf_sigma_px: f64,
    pub signal_photons_per_frame: f64,
    pub read_noise_e: f64,
    pub roi_mode: bool,
    pub shot_noise: bool,
    pub excursion_limit_deg: f64,
    pub actuation_bandwidth_hz: f64,
    pub quantization_urad: f64,
    pub turbulence_tilt_sigma_urad: f64,
    pub turbulence_rejection: f64,
    pub imu_drift_sigma_urad: f64,
    pub tracker_gain: f64,
    pub offload_time_constant_s: f64,
    pub beacon_wavelength_nm: f64,
    pub downlink_wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WcpSection {
    pub pulse_rate_hz: f64,
    pub mean_photons_signal: f64,
    pub mean_photons_decoy: f64,
    pub signal_fraction: f64,
    pub decoy_fraction: f64,
    pub vacuum_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntangledSection {
    pub pair_rate_hz: f64,
    pub heralding_efficiency_local: f64,
    pub intrinsic_visibility: f64,
    pub timing_jitter_sigma_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub background_rate_hz: f64,
    pub dead_time_ns: f64,
    pub jitter_sigma_ns: f64,
    pub misalignment_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommsSection {
    pub downlink_rate_bps: f64,
    pub contact_yield_bytes: f64,
    pub station_count: u32,
    pub contacts_per_station_per_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub orbit_average_w: f64,
    pub battery_wh: f64,
    pub experiment_draw_w: f64,
    pub platform_draw_w: f64,
    pub depth_of_discharge_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub clear_weather_probability: f64,
    pub transmission_min_elevation_deg: f64,
    pub propagation_step_s: f64,
    pub end_altitude_km: f64,
    pub pointing_sample_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeorbitSection {
    pub initial_altitude_km: f64,
    pub activities: Vec<String>,
    /// Spacing of the exported altitude profile, days.
    pub profile_stride_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdSection {
    /// Which night pass to simulate, counting from zero.
    pub pass_index: u32,
    pub pairing_window_ns: f64,
    /// Photon-level length of an entangled run, scaled to the window.
    pub entangled_sample_s: f64,
    /// Ground clock offset the entangled run has to recover.
    pub clock_offset_ms: f64,
    pub search_span_s: f64,
    pub correlation_bin_ns: f64,
    /// Cap on exported detection events.
    pub max_event_rows: u64,
}

/// A whole scenario document. Every key is required after defaults are
/// merged in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: i64,
    pub run: RunSection,
    pub deployment: DeploymentSection,
    pub spacecraft: SpacecraftSection,
    pub solar: SolarSection,
    pub station: StationSection,
    pub link: LinkSection,
    pub wcp_optics: OpticsSection,
    pub entangled_optics: OpticsSection,
    pub pointing: PointingSection,
    pub wcp: WcpSection,
    pub entangled: EntangledSection,
    pub detector: DetectorSection,
    pub onboard_detector: DetectorSection,
    pub comms: CommsSection,
    pub power: PowerSection,
    pub schedule: ScheduleSection,
    pub deorbit: DeorbitSection,
    pub qkd: QkdSection,
}

fn optics_section(o: &OpticalSourceGeometry) -> OpticsSection {
    let (beam, aperture, waist) = match o.shape {
        BeamShape::FlatTopAperture { aperture_diameter } => ("flat_top", aperture_diameter, 0.0325),
        BeamShape::GaussianWaist { waist_radius } => ("gaussian", o.telescope_aperture, waist_radius),
    };
    OpticsSection {
        beam: beam.to_string(),
        aperture_diameter_m: aperture,
        waist_radius_m: waist,
        wavelength_nm: o.wavelength_nm,
        telescope_aperture_m: o.telescope_aperture,
    }
}

fn detector_section(d: &DetectorConfig) -> DetectorSection {
    DetectorSection {
        efficiency: d.efficiency,
        dark_rate_hz: d.dark_rate,
        background_rate_hz: d.background_rate,
        dead_time_ns: d.dead_time * 1e9,
        jitter_sigma_ns: d.jitter_sigma * 1e9,
        misalignment_error: d.misalignment_error,
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let m = MissionConfig::default();
        let hw = &m.hardware;
        let p = &hw.pointing;
        Self {
            version: SCENARIO_VERSION,
            run: RunSection { months: 12 },
            deployment: DeploymentSection {
                altitude_km: m.deployment.altitude_m / 1e3,
                inclination_deg: m.deployment.inclination_deg,
                raan_deg: m.deployment.raan_deg,
                start_date: m.deployment.start.format("%Y-%m-%d").to_string(),
            },
            spacecraft: SpacecraftSection {
                mass_kg: m.body.mass,
                min_drag_area_m2: m.body.min_drag_area,
                drag_coefficient: m.body.drag_coefficient,
            },
            solar: SolarSection {
                activity: m.solar.name().to_string(),
            },
            station: StationSection {
                name: m.station.name.clone(),
                latitude_deg: m.station.latitude,
                longitude_deg: m.station.longitude,
                altitude_m: m.station.altitude,
                min_track_elevation_deg: m.station.min_track_elevation,
                min_experiment_culmination_deg: m.station.min_experiment_culmination,
            },
            link: LinkSection {
                source: "wcp".to_string(),
                receiver_diameter_m: hw.link.receiver_diameter,
                jitter_sigma_urad: hw.link.jitter_sigma,
                optics_efficiency: hw.link.optics_efficiency,
                atmosphere_transmittance_800nm_at_20deg: hw.link.atmosphere.transmittance_800nm_at_20deg,
                atmosphere_wavelength_exponent: hw.link.atmosphere.wavelength_exponent,
                sweep_elevations_deg: vec![20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0],
            },
            wcp_optics: optics_section(&hw.wcp_optics),
            entangled_optics: optics_section(&hw.entangled_optics),
            pointing: PointingSection {
                coarse_bias_urad: p.coarse.bias,
                coarse_sigma_urad: p.coarse.sigma,
                coarse_drift_timescale_s: p.coarse.drift_timescale,
                buffeting_amplitude_urad: p.coarse.buffeting_amplitude,
                pixel_pitch_urad: p.tracker.pixel_pitch_angle,
                frame_rate_hz: p.tracker.frame_rate,
                psf_sigma_px: p.tracker.psf_sigma,
                signal_photons_per_frame: p.tracker.signal_photons_per_frame,
                read_noise_e: p.tracker.read_noise,
                roi_mode: p.tracker.roi_mode,
                shot_noise: p.tracker.shot_noise,
                excursion_limit_deg: p.steering.excursion_limit,
                actuation_bandwidth_hz: p.steering.actuation_bandwidth,
                quantization_urad: p.steering.quantization,
                turbulence_tilt_sigma_urad: p.turbulence_tilt_sigma,
                turbulence_rejection: p.turbulence_rejection,
                imu_drift_sigma_urad: p.imu_drift_sigma,
                tracker_gain: p.tracker_gain,
                offload_time_constant_s: p.offload_time_constant,
                beacon_wavelength_nm: p.beacon_wavelength_nm,
                downlink_wavelength_nm: p.downlink_wavelength_nm,
            },
            wcp: WcpSection {
                pulse_rate_hz: hw.wcp.pulse_rate,
                mean_photons_signal: hw.wcp.mean_photons_signal,
                mean_photons_decoy: hw.wcp.mean_photons_decoy,
                signal_fraction: hw.wcp.signal_fraction,
                decoy_fraction: hw.wcp.decoy_fraction,
                vacuum_fraction: hw.wcp.vacuum_fraction,
            },
            entangled: EntangledSection {
                pair_rate_hz: hw.entangled.pair_rate,
                heralding_efficiency_local: hw.entangled.heralding_efficiency_local,
                intrinsic_visibility: hw.entangled.intrinsic_visibility,
                timing_jitter_sigma_ns: hw.entangled.timing_jitter_sigma * 1e9,
            },
            detector: detector_section(&hw.detector),
            onboard_detector: detector_section(&hw.onboard_detector),
            comms: CommsSection {
                downlink_rate_bps: m.comms.downlink_rate_bps,
                contact_yield_bytes: m.comms.contact_yield_bytes,
                station_count: m.comms.station_count,
                contacts_per_station_per_day: m.comms.contacts_per_station_per_day,
            },
            power: PowerSection {
                orbit_average_w: m.power.orbit_average_w,
                battery_wh: m.power.battery_wh,
                experiment_draw_w: m.power.experiment_draw_w,
                platform_draw_w: m.power.platform_draw_w,
                depth_of_discharge_limit: m.power.depth_of_discharge_limit,
            },
            schedule: ScheduleSection {
                clear_weather_probability: m.schedule.clear_weather_probability,
                transmission_min_elevation_deg: m.schedule.transmission_min_elevation_deg,
                propagation_step_s: m.schedule.propagation_step_s,
                end_altitude_km: m.schedule.end_altitude_m / 1e3,
                pointing_sample_s: m.schedule.pointing_sample_s,
            },
            deorbit: DeorbitSection {
                initial_altitude_km: 450.0,
                activities: SolarActivity::ALL.iter().map(|a| a.name().to_string()).collect(),
                profile_stride_days: 30,
            },
            qkd: QkdSection {
                pass_index: 0,
                pairing_window_ns: hw.pairing_window_ps as f64 / 1e3,
                entangled_sample_s: 1.0,
                clock_offset_ms: 12.345,
                search_span_s: 1.0,
                correlation_bin_ns: 1.0,
                max_event_rows: 100_000,
            },
        }
    }
}

/// A parsed scenario plus the keys that fell back to defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// Dotted key paths absent from the document.
    pub defaults_applied: Vec<String>,
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Overlay `user` on `defaults`, rejecting unknown keys and type mismatches.
fn merge(defaults: &Table, user: &Table, prefix: &str, applied: &mut Vec<String>) -> Result<Table, ScenarioError> {
    let path = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    if let Some(k) = user.keys().find(|k| !defaults.contains_key(*k)) {
        return Err(ScenarioError::UnknownKey { key: path(k) });
    }
    let mut out = Table::new();
    for (k, d) in defaults {
        let merged = match (d, user.get(k)) {
            (Value::Table(dt), None) => Value::Table(merge(dt, &Table::new(), &path(k), applied)?),
            (_, None) => {
                applied.push(path(k));
                d.clone()
            }
            (Value::Table(dt), Some(Value::Table(ut))) => Value::Table(merge(dt, ut, &path(k), applied)?),
            (Value::Float(_), Some(Value::Integer(i))) => Value::Float(*i as f64),
            (Value::Array(da), Some(Value::Array(ua))) => {
                let elem = da.first().map(type_name);
                let mut items = Vec::with_capacity(ua.len());
                for u in ua {
                    items.push(match (elem, u) {
                        (Some("float"), Value::Integer(i)) => Value::Float(*i as f64),
                        (Some(e), u) if e != type_name(u) => {
                            return Err(ScenarioError::WrongType {
                                key: path(k),
                                expected: format!("array of {e}"),
                            })
                        }
                        (_, u) => u.clone(),
                    });
                }
                Value::Array(items)
            }
            (d, Some(u)) if type_name(d) == type_name(u) => u.clone(),
            (d, Some(_)) => {
                return Err(ScenarioError::WrongType {
                    key: path(k),
                    expected: type_name(d).to_string(),
                })
            }
        };
        out.insert(k.clone(), merged);
    }
    Ok(out)
}

/// Parse scenario text: strict keys, defaults for anything missing.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let user: Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Malformed(e.message().to_string()))?;
    let defaults = Table::try_from(ScenarioFile::default()).expect("defaults serialise");
    let mut applied = Vec::new();
    let merged = merge(&defaults, &user, "", &mut applied)?;
    let file: ScenarioFile = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ScenarioError::Malformed(e.message().to_string()))?;
    if file.version != SCENARIO_VERSION {
        return Err(ScenarioError::UnsupportedVersion(file.version));
    }
    file.mission_config()?;
    file.deorbit_activities()?;
    file.check_qkd()?;
    Ok(Scenario {
        file,
        defaults_applied: applied,
    })
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario_str(&text)
}

fn range(key: &str, value: f64, lo: f64, hi: f64, unit: &str) -> Result<(), ScenarioError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(ScenarioError::OutOfRange {
            key: key.to_string(),
            value: value.to_string(),
            constraint: format!("must lie in [{lo}, {hi}]{unit}"),
        })
    }
}

fn positive(key: &str, value: f64) -> Result<(), ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::OutOfRange {
            key: key.to_string(),
            value: value.to_string(),
            constraint: "must be positive".to_string(),
        })
    }
}

fn model(section: &'static str) -> impl Fn(crate::error::ModelError) -> ScenarioError {
    move |source| ScenarioError::Model { section, source }
}

fn parse_activity(key: &str, name: &str) -> Result<SolarActivity, ScenarioError> {
    SolarActivity::ALL.into_iter().find(|a| a.name() == name).ok_or_else(|| ScenarioError::OutOfRange {
        key: key.to_string(),
        value: name.to_string(),
        constraint: "must be one of extended_minimum, very_low, moderate, high".to_string(),
    })
}

impl OpticsSection {
    fn geometry(&self, section: &'static str) -> Result<OpticalSourceGeometry, ScenarioError> {
        positive(&format!("{section}.wavelength_nm"), self.wavelength_nm)?;
        positive(&format!("{section}.telescope_aperture_m"), self.telescope_aperture_m)?;
        let shape = match self.beam.as_str() {
            "flat_top" => {
                positive(&format!("{section}.aperture_diameter_m"), self.aperture_diameter_m)?;
                BeamShape::FlatTopAperture {
                    aperture_diameter: self.aperture_diameter_m,
                }
            }
            "gaussian" => {
                positive(&format!("{section}.waist_radius_m"), self.waist_radius_m)?;
                BeamShape::GaussianWaist {
                    waist_radius: self.waist_radius_m,
                }
            }
            other => {
                return Err(ScenarioError::OutOfRange {
                    key: format!("{section}.beam"),
                    value: other.to_string(),
                    constraint: "must be flat_top or gaussian".to_string(),
                })
            }
        };
        let g = OpticalSourceGeometry {
            shape,
            wavelength_nm: self.wavelength_nm,
            telescope_aperture: self.telescope_aperture_m,
        };
        g.validate().map_err(model(section))?;
        Ok(g)
    }
}

impl DetectorSection {
    fn config(&self, section: &'static str) -> Result<DetectorConfig, ScenarioError> {
        let key = |k: &str| format!("{section}.{k}");
        range(&key("efficiency"), self.efficiency, 1e-9, 1.0, "")?;
        range(&key("dark_rate_hz"), self.dark_rate_hz, 0.0, 1e8, " Hz")?;
        range(&key("background_rate_hz"), self.background_rate_hz, 0.0, 1e8, " Hz")?;
        range(&key("dead_time_ns"), self.dead_time_ns, 0.0, 1e6, " ns")?;
        range(&key("jitter_sigma_ns"), self.jitter_sigma_ns, 0.0, 1e3, " ns")?;
        range(&key("misalignment_error"), self.misalignment_error, 0.0, 0.5, "")?;
        let d = DetectorConfig {
            efficiency: self.efficiency,
            dark_rate: self.dark_rate_hz,
            background_rate: self.background_rate_hz,
            dead_time: self.dead_time_ns / 1e9,
            jitter_sigma: self.jitter_sigma_ns / 1e9,
            misalignment_error: self.misalignment_error,
        };
        d.validate().map_err(model(section))?;
        Ok(d)
    }
}

impl ScenarioFile {
    pub fn source_kind(&self) -> Result<SourceKind, ScenarioError> {
        match self.link.source.as_str() {
            "wcp" => Ok(SourceKind::Wcp),
            "entangled" => Ok(SourceKind::Entangled),
            other => Err(ScenarioError::OutOfRange {
                key: "link.source".to_string(),
                value: other.to_string(),
                constraint: "must be wcp or entangled".to_string(),
            }),
        }
    }

    pub fn solar_activity(&self) -> Result<SolarActivity, ScenarioError> {
        parse_activity("solar.activity", &self.solar.activity)
    }

    pub fn deorbit_activities(&self) -> Result<Vec<SolarActivity>, ScenarioError> {
        range("deorbit.initial_altitude_km", self.deorbit.initial_altitude_km, 300.0, 500.0, " km")?;
        if self.deorbit.profile_stride_days == 0 {
            return Err(ScenarioError::OutOfRange {
                key: "deorbit.profile_stride_days".to_string(),
                value: "0".to_string(),
                constraint: "must be at least 1".to_string(),
            });
        }
        self.deorbit.activities.iter().map(|a| parse_activity("deorbit.activities", a)).collect()
    }

    fn check_qkd(&self) -> Result<(), ScenarioError> {
        let q = &self.qkd;
        positive("qkd.pairing_window_ns", q.pairing_window_ns)?;
        range("qkd.entangled_sample_s", q.entangled_sample_s, 1e-3, 10.0, " s")?;
        range("qkd.clock_offset_ms", q.clock_offset_ms, -1e3, 1e3, " ms")?;
        range("qkd.search_span_s", q.search_span_s, 1e-6, 10.0, " s")?;
        range("qkd.correlation_bin_ns", q.correlation_bin_ns, 1e-3, 1e6, " ns")?;
        if q.clock_offset_ms.abs() / 1e3 > q.search_span_s {
            return Err(ScenarioError::OutOfRange {
                key: "qkd.clock_offset_ms".to_string(),
                value: q.clock_offset_ms.to_string(),
                constraint: "must lie within qkd.search_span_s".to_string(),
            });
        }
        Ok(())
    }

    pub fn start(&self) -> Result<chrono::DateTime<Utc>, ScenarioError> {
        let date = NaiveDate::parse_from_str(&self.deployment.start_date, "%Y-%m-%d").map_err(|_| ScenarioError::OutOfRange {
            key: "deployment.start_date".to_string(),
            value: self.deployment.start_date.clone(),
            constraint: "must be a date written YYYY-MM-DD".to_string(),
        })?;
        Ok(Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight exists")))
    }

    pub fn pointing_config(&self) -> Result<PointingConfig, ScenarioError> {
        let p = &self.pointing;
        let c = PointingConfig {
            coarse: CoarsePointingModel {
                bias: p.coarse_bias_urad,
                sigma: p.coarse_sigma_urad,
                drift_timescale: p.coarse_drift_timescale_s,
                buffeting_amplitude: p.buffeting_amplitude_urad,
            },
            tracker: BeaconTrackerModel {
                pixel_pitch_angle: p.pixel_pitch_urad,
                frame_rate: p.frame_rate_hz,
                psf_sigma: p.psf_sigma_px,
                signal_photons_per_frame: p.signal_photons_per_frame,
                read_noise: p.read_noise_e,
                roi_mode: p.roi_mode,
                shot_noise: p.shot_noise,
            },
            steering: SteeringModel {
                excursion_limit: p.excursion_limit_deg,
                actuation_bandwidth: p.actuation_bandwidth_hz,
                quantization: p.quantization_urad,
            },
            turbulence_tilt_sigma: p.turbulence_tilt_sigma_urad,
            turbulence_rejection: p.turbulence_rejection,
            imu_drift_sigma: p.imu_drift_sigma_urad,
            tracker_gain: p.tracker_gain,
            offload_time_constant: p.offload_time_constant_s,
            beacon_wavelength_nm: p.beacon_wavelength_nm,
            downlink_wavelength_nm: p.downlink_wavelength_nm,
        };
        c.validate().map_err(model("pointing"))?;
        Ok(c)
    }

    /// All module configs, range-checked with scenario key names.
    pub fn mission_config(&self) -> Result<MissionConfig, ScenarioError> {
        if self.run.months == 0 {
            return Err(ScenarioError::OutOfRange {
                key: "run.months".to_string(),
                value: "0".to_string(),
                constraint: "must be at least 1".to_string(),
            });
        }
        let d = &self.deployment;
        range("deployment.altitude_km", d.altitude_km, 300.0, 500.0, " km")?;
        range("deployment.inclination_deg", d.inclination_deg, 0.0, 180.0, " deg")?;
        range("deployment.raan_deg", d.raan_deg, -360.0, 360.0, " deg")?;
        let deployment = Deployment {
            altitude_m: d.altitude_km * 1e3,
            inclination_deg: d.inclination_deg,
            raan_deg: d.raan_deg,
            start: self.start()?,
        };

        let s = &self.spacecraft;
        positive("spacecraft.mass_kg", s.mass_kg)?;
        positive("spacecraft.min_drag_area_m2", s.min_drag_area_m2)?;
        range("spacecraft.drag_coefficient", s.drag_coefficient, 1.5, 3.0, "")?;
        let body = SpacecraftBody {
            mass: s.mass_kg,
            min_drag_area: s.min_drag_area_m2,
            drag_coefficient: s.drag_coefficient,
        };

        let st = &self.station;
        range("station.latitude_deg", st.latitude_deg, -90.0, 90.0, " deg")?;
        range("station.longitude_deg", st.longitude_deg, -180.0, 180.0, " deg")?;
        range("station.altitude_m", st.altitude_m, -500.0, 9000.0, " m")?;
        range("station.min_track_elevation_deg", st.min_track_elevation_deg, 0.0, 89.0, " deg")?;
        range(
            "station.min_experiment_culmination_deg",
            st.min_experiment_culmination_deg,
            st.min_track_elevation_deg,
            90.0,
            " deg",
        )?;
        let station = GroundStation {
            name: st.name.clone(),
            latitude: st.latitude_deg,
            longitude: st.longitude_deg,
            altitude: st.altitude_m,
            min_track_elevation: st.min_track_elevation_deg,
            min_experiment_culmination: st.min_experiment_culmination_deg,
        };
        station.validate().map_err(model("station"))?;

        let l = &self.link;
        positive("link.receiver_diameter_m", l.receiver_diameter_m)?;
        range("link.jitter_sigma_urad", l.jitter_sigma_urad, 0.0, 1e3, " urad")?;
        range("link.optics_efficiency", l.optics_efficiency, 1e-9, 1.0, "")?;
        range("link.atmosphere_transmittance_800nm_at_20deg", l.atmosphere_transmittance_800nm_at_20deg, 1e-6, 1.0, "")?;
        range("link.atmosphere_wavelength_exponent", l.atmosphere_wavelength_exponent, 0.0, 8.0, "")?;
        for e in &l.sweep_elevations_deg {
            range("link.sweep_elevations_deg", *e, 1.0, 90.0, " deg")?;
        }
        let link = LinkParameters {
            receiver_diameter: l.receiver_diameter_m,
            jitter_sigma: l.jitter_sigma_urad,
            optics_efficiency: l.optics_efficiency,
            atmosphere: AtmosphereModel {
                transmittance_800nm_at_20deg: l.atmosphere_transmittance_800nm_at_20deg,
                wavelength_exponent: l.atmosphere_wavelength_exponent,
            },
        };
        link.validate().map_err(model("link"))?;

        let w = &self.wcp;
        positive("wcp.pulse_rate_hz", w.pulse_rate_hz)?;
        positive("wcp.mean_photons_signal", w.mean_photons_signal)?;
        range("wcp.mean_photons_decoy", w.mean_photons_decoy, 0.0, w.mean_photons_signal, "")?;
        for (k, v) in [
            ("wcp.signal_fraction", w.signal_fraction),
            ("wcp.decoy_fraction", w.decoy_fraction),
            ("wcp.vacuum_fraction", w.vacuum_fraction),
        ] {
            range(k, v, 0.0, 1.0, "")?;
        }
        let wcp = WcpSourceConfig {
            pulse_rate: w.pulse_rate_hz,
            mean_photons_signal: w.mean_photons_signal,
            mean_photons_decoy: w.mean_photons_decoy,
            signal_fraction: w.signal_fraction,
            decoy_fraction: w.decoy_fraction,
            vacuum_fraction: w.vacuum_fraction,
        };
        wcp.validate().map_err(model("wcp"))?;

        let e = &self.entangled;
        positive("entangled.pair_rate_hz", e.pair_rate_hz)?;
        range("entangled.heralding_efficiency_local", e.heralding_efficiency_local, 1e-9, 1.0, "")?;
        range("entangled.intrinsic_visibility", e.intrinsic_visibility, 0.700_000_001, 1.0, "")?;
        range("entangled.timing_jitter_sigma_ns", e.timing_jitter_sigma_ns, 0.0, 1e3, " ns")?;
        let entangled = EntangledSourceConfig {
            pair_rate: e.pair_rate_hz,
            heralding_efficiency_local: e.heralding_efficiency_local,
            intrinsic_visibility: e.intrinsic_visibility,
            timing_jitter_sigma: e.timing_jitter_sigma_ns / 1e9,
        };
        entangled.validate().map_err(model("entangled"))?;

        let p = &self.pointing;
        range("pointing.coarse_sigma_urad", p.coarse_sigma_urad, 0.0, 1e5, " urad")?;
        range("pointing.frame_rate_hz", p.frame_rate_hz, 1.0, BeaconTrackerModel::ROI_MAX_HZ, " Hz")?;
        range("pointing.excursion_limit_deg", p.excursion_limit_deg, 1e-6, 45.0, " deg")?;
        let pointing = self.pointing_config()?;

        let hardware = Hardware {
            source: self.source_kind()?,
            wcp_optics: self.wcp_optics.geometry("wcp_optics")?,
            entangled_optics: self.entangled_optics.geometry("entangled_optics")?,
            wcp,
            entangled,
            detector: self.detector.config("detector")?,
            onboard_detector: self.onboard_detector.config("onboard_detector")?,
            pointing,
            link,
            pairing_window_ps: (self.qkd.pairing_window_ns * 1e3).round() as i64,
        };

        let c = &self.comms;
        range("comms.downlink_rate_bps", c.downlink_rate_bps, 0.0, 1e12, " bit/s")?;
        range("comms.contact_yield_bytes", c.contact_yield_bytes, 0.0, 1e13, " bytes")?;
        let comms = CommsConfig {
            downlink_rate_bps: c.downlink_rate_bps,
            contact_yield_bytes: c.contact_yield_bytes,
            station_count: c.station_count,
            contacts_per_station_per_day: c.contacts_per_station_per_day,
        };

        let pw = &self.power;
        range("power.orbit_average_w", pw.orbit_average_w, 0.0, 1e4, " W")?;
        positive("power.battery_wh", pw.battery_wh)?;
        range("power.experiment_draw_w", pw.experiment_draw_w, 0.0, 1e4, " W")?;
        range("power.platform_draw_w", pw.platform_draw_w, 0.0, 1e4, " W")?;
        range("power.depth_of_discharge_limit", pw.depth_of_discharge_limit, 1e-9, 0.999_999_999, "")?;
        let power = PowerConfig {
            orbit_average_w: pw.orbit_average_w,
            battery_wh: pw.battery_wh,
            experiment_draw_w: pw.experiment_draw_w,
            platform_draw_w: pw.platform_draw_w,
            depth_of_discharge_limit: pw.depth_of_discharge_limit,
        };

        let sc = &self.schedule;
        range("schedule.clear_weather_probability", sc.clear_weather_probability, 0.0, 1.0, "")?;
        range("schedule.transmission_min_elevation_deg", sc.transmission_min_elevation_deg, 0.0, 89.0, " deg")?;
        range("schedule.propagation_step_s", sc.propagation_step_s, 0.1, 10.0, " s")?;
        range("schedule.end_altitude_km", sc.end_altitude_km, 130.0, 500.0, " km")?;
        range("schedule.pointing_sample_s", sc.pointing_sample_s, 0.0, 3600.0, " s")?;
        let schedule = Schedule {
            clear_weather_probability: sc.clear_weather_probability,
            transmission_min_elevation_deg: sc.transmission_min_elevation_deg,
            propagation_step_s: sc.propagation_step_s,
            end_altitude_m: sc.end_altitude_km * 1e3,
            pointing_sample_s: sc.pointing_sample_s,
        };

        let config = MissionConfig {
            deployment,
            body,
            solar: self.solar_activity()?,
            station,
            hardware,
            comms,
            power,
            schedule,
        };
        config.validate().map_err(model("scenario"))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips_to_defaults() {
        let s = parse_scenario_str(REFERENCE_SCENARIO).unwrap();
        assert_eq!(s.file, ScenarioFile::default());
        assert!(s.defaults_applied.is_empty(), "{:?}", s.defaults_applied);
        assert_eq!(s.file.mission_config().unwrap(), MissionConfig::default());
    }

    #[test]
    fn empty_document_is_all_defaults() {
        let s = parse_scenario_str("").unwrap();
        assert_eq!(s.file, ScenarioFile::default());
        assert!(s.defaults_applied.contains(&"deployment.altitude_km".to_string()));
        assert!(s.defaults_applied.contains(&"version".to_string()));
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        let s = parse_scenario_str("[deployment]\naltitude_km = 420\n").unwrap();
        assert_eq!(s.file.deployment.altitude_km, 420.0);
        assert!(!s.defaults_applied.contains(&"deployment.altitude_km".to_string()));
    }

    #[test]
    fn out_of_range_altitude_names_the_key() {
        let err = parse_scenario_str("[deployment]\naltitude_km = 900\n").unwrap_err();
        match err {
            ScenarioError::OutOfRange { key, constraint, .. } => {
                assert_eq!(key, "deployment.altitude_km");
                assert!(constraint.contains("[300, 500]"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_are_named() {
        let err = parse_scenario_str("[deployment]\naltitude_m = 400\n").unwrap_err();
        assert_eq!(err, ScenarioError::UnknownKey { key: "deployment.altitude_m".into() });
        let err = parse_scenario_str("[bogus]\nx = 1\n").unwrap_err();
        assert_eq!(err, ScenarioError::UnknownKey { key: "bogus".into() });
        let err = parse_scenario_str("[pointing]\nroi_mode = 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::WrongType { ref key, .. } if key == "pointing.roi_mode"));
        let err = parse_scenario_str("version = 2\n").unwrap_err();
        assert_eq!(err, ScenarioError::UnsupportedVersion(2));
        assert!(matches!(parse_scenario_str("[run\n"), Err(ScenarioError::Malformed(_))));
    }

    #[test]
    fn enum_strings_are_checked() {
        let err = parse_scenario_str("[solar]\nactivity = \"extreme\"\n").unwrap_err();
        assert!(matches!(err, ScenarioError::OutOfRange { ref key, .. } if key == "solar.activity"));
        let s = parse_scenario_str("[link]\nsource = \"entangled\"\n").unwrap();
        assert_eq!(s.file.mission_config().unwrap().hardware.source, SourceKind::Entangled);
    }
}
