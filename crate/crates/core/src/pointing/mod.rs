//! Two-stage pointing chain: coarse body pointing, beacon tracking with an
//! IMU-propagated estimator, and a rate-limited beam-steering mirror.

mod centroid;
mod disturbance;

pub use centroid::{add_noise, centroid, render_spot, Centroid, Image};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ModelError, Result};
use crate::geometry::{dispersion_offset, point_ahead, PassEvent, TopoPoint};
use crate::link::{offset_intensity, OpticalSourceGeometry};
use disturbance::{CoarseAxis, GaussMarkov};

/// Corner frequency of the coloured coarse-pointing noise, Hz.
pub const COARSE_NOISE_CORNER_HZ: f64 = 0.1;
/// Correlation time of atmospheric tilt, s.
pub const TURBULENCE_CORRELATION_S: f64 = 0.05;
/// Sustained saturation or tracking failure longer than this loses lock, s.
pub const LOCK_LOSS_S: f64 = 1.0;
const SUBSTEPS_PER_FRAME: usize = 4;
const IMU_CORRELATION_S: f64 = 1.0;
const TRACKER_WINDOW_PX: usize = 15;
const URAD_PER_DEG: f64 = std::f64::consts::PI / 180.0 * 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePointingModel {
    /// Amplitude of the slow sinusoidal drift, µrad.
    pub bias: f64,
    /// Per-axis 1σ of the coloured noise, µrad.
    pub sigma: f64,
    /// Period of the bias drift and scale of the buffeting walk, s.
    pub drift_timescale: f64,
    /// Cap on the buffeting random walk, µrad.
    pub buffeting_amplitude: f64,
}

impl Default for CoarsePointingModel {
    fn default() -> Self {
        Self {
            bias: 20.0,
            sigma: 40.0,
            drift_timescale: 60.0,
            buffeting_amplitude: 10.0,
        }
    }
}

impl CoarsePointingModel {
    pub const MAX_BUFFETING_URAD: f64 = 50.0;

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bias", self.bias),
            ("sigma", self.sigma),
            ("buffeting_amplitude", self.buffeting_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::invalid(name, "must be finite and non-negative"));
            }
        }
        if !(self.drift_timescale > 0.0) {
            return Err(ModelError::invalid("drift_timescale", "must be positive"));
        }
        if self.buffeting_amplitude > Self::MAX_BUFFETING_URAD {
            return Err(ModelError::invalid("buffeting_amplitude", "must not exceed 50 µrad"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeaconTrackerModel {
    /// Plate scale, µrad per pixel.
    pub pixel_pitch_angle: f64,
    pub frame_rate: f64,
    /// Deliberate defocus, pixels.
    pub psf_sigma: f64,
    pub signal_photons_per_frame: f64,
    /// Electrons RMS per pixel.
    pub read_noise: f64,
    pub roi_mode: bool,
    /// Draw Poisson photon noise on each frame.
    pub shot_noise: bool,
}

impl Default for BeaconTrackerModel {
    fn default() -> Self {
        Self {
            pixel_pitch_angle: 5.0,
            frame_rate: 300.0,
            psf_sigma: 1.5,
            signal_photons_per_frame: 10_000.0,
            read_noise: 10.0,
            roi_mode: false,
            shot_noise: true,
        }
    }
}

impl BeaconTrackerModel {
    pub const FULL_FRAME_MAX_HZ: f64 = 300.0;
    pub const ROI_MAX_HZ: f64 = 1000.0;

    pub fn validate(&self) -> Result<()> {
        let max = if self.roi_mode { Self::ROI_MAX_HZ } else { Self::FULL_FRAME_MAX_HZ };
        if !(self.frame_rate > 0.0 && self.frame_rate <= max) {
            return Err(ModelError::invalid("frame_rate", format!("must lie in (0, {max}] Hz for this readout mode")));
        }
        if !(self.pixel_pitch_angle > 0.0) {
            return Err(ModelError::invalid("pixel_pitch_angle", "must be positive"));
        }
        if !(self.psf_sigma >= 0.5) {
            return Err(ModelError::invalid("psf_sigma", "must be at least 0.5 pixel"));
        }
        if !(self.signal_photons_per_frame > 0.0 && self.signal_photons_per_frame.is_finite()) {
            return Err(ModelError::invalid("signal_photons_per_frame", "must be positive"));
        }
        if !(self.read_noise >= 0.0 && self.read_noise.is_finite()) {
            return Err(ModelError::invalid("read_noise", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringModel {
    /// Mechanical half-range, degrees.
    pub excursion_limit: f64,
    /// First-order actuator bandwidth, Hz.
    pub actuation_bandwidth: f64,
    /// Command resolution, µrad.
    pub quantization: f64,
}

impl Default for SteeringModel {
    fn default() -> Self {
        Self {
            excursion_limit: 3.0,
            actuation_bandwidth: 1000.0,
            quantization: 0.05,
        }
    }
}

impl SteeringModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.excursion_limit >= 1.0 && self.excursion_limit.is_finite()) {
            return Err(ModelError::invalid("excursion_limit", "must be at least 1 degree"));
        }
        if !(self.actuation_bandwidth > 0.0) {
            return Err(ModelError::invalid("actuation_bandwidth", "must be positive"));
        }
        if !(self.quantization >= 0.0 && self.quantization.is_finite()) {
            return Err(ModelError::invalid("quantization", "must be non-negative"));
        }
        Ok(())
    }
}

/// Everything the closed-loop run needs besides the pass and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingConfig {
    pub coarse: CoarsePointingModel,
    pub tracker: BeaconTrackerModel,
    pub steering: SteeringModel,
    /// Per-axis 1σ atmospheric tilt on the beacon, µrad.
    pub turbulence_tilt_sigma: f64,
    /// Fraction of the beacon tilt shared by the downlink.
    pub turbulence_rejection: f64,
    /// IMU attitude error floor, µrad RMS per axis.
    pub imu_drift_sigma: f64,
    /// Weight given to each tracker innovation.
    pub tracker_gain: f64,
    /// Time constant of the mirror-to-ADCS offload, s.
    pub offload_time_constant: f64,
    pub beacon_wavelength_nm: f64,
    pub downlink_wavelength_nm: f64,
}

impl Default for PointingConfig {
    fn default() -> Self {
        Self {
            coarse: CoarsePointingModel::default(),
            tracker: BeaconTrackerModel::default(),
            steering: SteeringModel::default(),
            turbulence_tilt_sigma: 1.0,
            turbulence_rejection: 0.5,
            imu_drift_sigma: 0.5,
            tracker_gain: 0.5,
            offload_time_constant: 20.0,
            beacon_wavelength_nm: 532.0,
            downlink_wavelength_nm: 800.0,
        }
    }
}

impl PointingConfig {
    pub fn validate(&self) -> Result<()> {
        self.coarse.validate()?;
        self.tracker.validate()?;
        self.steering.validate()?;
        if !(self.turbulence_tilt_sigma >= 0.0 && self.turbulence_tilt_sigma.is_finite()) {
            return Err(ModelError::invalid("turbulence_tilt_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.turbulence_rejection) {
            return Err(ModelError::invalid("turbulence_rejection", "must lie in [0, 1]"));
        }
        if !(self.imu_drift_sigma >= 0.0 && self.imu_drift_sigma.is_finite()) {
            return Err(ModelError::invalid("imu_drift_sigma", "must be non-negative"));
        }
        if !(self.tracker_gain > 0.0 && self.tracker_gain <= 1.0) {
            return Err(ModelError::invalid("tracker_gain", "must lie in (0, 1]"));
        }
        if !(self.offload_time_constant > 0.0) {
            return Err(ModelError::invalid("offload_time_constant", "must be positive"));
        }
        ensure_finite("beacon_wavelength_nm", self.beacon_wavelength_nm)?;
        ensure_finite("downlink_wavelength_nm", self.downlink_wavelength_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSample {
    pub epoch: f64,
    /// Along-track axis, µrad.
    pub x: f64,
    /// Elevation axis, µrad.
    pub y: f64,
}

impl ResidualSample {
    pub fn radial(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointingRun {
    /// Spacing of the recorded series (one tracker frame), s.
    pub time_step: f64,
    pub residual_error_series: Vec<ResidualSample>,
    pub rms_radial: f64,
    pub fraction_within_3urad: f64,
    pub bsm_saturation_events: u32,
    /// RMS radial error the coarse stage alone would leave, µrad.
    pub open_loop_rms_radial: f64,
    pub lock_lost: bool,
}

impl PointingRun {
    fn summarise(time_step: f64, series: Vec<ResidualSample>, open_sq: f64, open_n: usize, saturations: u32, lock_lost: bool) -> Self {
        let (rms, within) = series_stats(&series);
        Self {
            time_step,
            residual_error_series: series,
            rms_radial: rms,
            fraction_within_3urad: within,
            bsm_saturation_events: saturations,
            open_loop_rms_radial: if open_n > 0 { (open_sq / open_n as f64).sqrt() } else { 0.0 },
            lock_lost,
        }
    }
}

/// RMS radial error and fraction of samples within 3 µrad.
pub fn series_stats(series: &[ResidualSample]) -> (f64, f64) {
    if series.is_empty() {
        return (0.0, 1.0);
    }
    let n = series.len() as f64;
    let sq: f64 = series.iter().map(|s| s.x * s.x + s.y * s.y).sum();
    let within = series.iter().filter(|s| s.radial() <= 3.0).count() as f64;
    ((sq / n).sqrt(), within / n)
}

/// Point-ahead (along-track) and dispersion (elevation) offsets along a pass.
struct OffsetTrack<'a> {
    track: &'a [TopoPoint],
    up_nm: f64,
    down_nm: f64,
}

impl OffsetTrack<'_> {
    fn offset_of(&self, p: &TopoPoint) -> Result<[f64; 2]> {
        let el = p.elevation.clamp(10.0, 90.0);
        Ok([point_ahead(p), dispersion_offset(el, self.up_nm, self.down_nm)?])
    }

    fn at(&self, t: f64) -> Result<[f64; 2]> {
        let i = self.track.partition_point(|p| p.epoch <= t);
        if i == 0 {
            return self.offset_of(&self.track[0]);
        }
        if i == self.track.len() {
            return self.offset_of(&self.track[i - 1]);
        }
        let (a, b) = (&self.track[i - 1], &self.track[i]);
        let (oa, ob) = (self.offset_of(a)?, self.offset_of(b)?);
        let s = if b.epoch > a.epoch { (t - a.epoch) / (b.epoch - a.epoch) } else { 0.0 };
        Ok([oa[0] + s * (ob[0] - oa[0]), oa[1] + s * (ob[1] - oa[1])])
    }
}

fn quantize(v: f64, q: f64) -> f64 {
    if q > 0.0 {
        (v / q).round() * q
    } else {
        v
    }
}

/// A tracker frame waiting out its readout latency.
struct PendingFrame {
    arrives_at: usize,
    measured: [f64; 2],
    estimate_at_exposure: [f64; 2],
}

/// Closed-loop Monte Carlo of the pointing chain over one pass.
///
/// The mirror deflection `u` steers both the beacon tracker and the downlink.
/// The tracker sees the beacon at `−b + t − u`. `b` is the body attitude
/// error and `t` the beacon tilt. Each frame arrives one frame interval after
/// exposure. Between frames the estimate is propagated with the IMU. The
/// downlink needs `−b + r·t`; point-ahead and dispersion are applied on top
/// of the mirror deflection, and the sum is clamped to the mechanical range.
pub fn simulate_pointing_run(config: &PointingConfig, pass: &PassEvent, seed: u64) -> Result<PointingRun> {
    config.validate()?;
    if pass.track.is_empty() {
        return Err(ModelError::invalid("pass", "track must be non-empty"));
    }
    let tracker = &config.tracker;
    let frame_dt = 1.0 / tracker.frame_rate;
    let dt = frame_dt / SUBSTEPS_PER_FRAME as f64;
    let t0 = pass.rise;
    let steps = ((pass.set - pass.rise) / dt).floor() as usize;
    let limit = config.steering.excursion_limit * URAD_PER_DEG;
    let actuator_gain = 1.0 - (-2.0 * std::f64::consts::PI * config.steering.actuation_bandwidth * dt).exp();
    let lock_loss_steps = (LOCK_LOSS_S / dt).ceil() as usize;
    let offsets = OffsetTrack {
        track: &pass.track,
        up_nm: config.beacon_wavelength_nm,
        down_nm: config.downlink_wavelength_nm,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coarse = [CoarseAxis::new(&config.coarse, dt, &mut rng), CoarseAxis::new(&config.coarse, dt, &mut rng)];
    let mut tilt = [0, 1].map(|_| GaussMarkov::new(config.turbulence_tilt_sigma, TURBULENCE_CORRELATION_S, dt, &mut rng));
    let mut imu = [0, 1].map(|_| GaussMarkov::new(config.imu_drift_sigma, IMU_CORRELATION_S, dt, &mut rng));

    // Coarse-to-fine handover: mirror and estimate start on the beacon.
    let mut offload = [0.0; 2];
    let mut body = [0.0; 2];
    for i in 0..2 {
        body[i] = coarse[i].step(t0, &mut rng);
    }
    let mut estimate = [-body[0] + tilt[0].value(), -body[1] + tilt[1].value()];
    let mut mirror = estimate;
    let mut imu_prev = [body[0] + imu[0].value(), body[1] + imu[1].value()];

    let mut series = Vec::with_capacity(steps / SUBSTEPS_PER_FRAME + 1);
    let mut pending: Option<PendingFrame> = None;
    let (mut open_sq, mut open_n) = (0.0, 0usize);
    let (mut saturated_run, mut failed_run, mut saturations) = (0usize, 0usize, 0u32);
    let mut was_saturated = false;
    let mut lock_lost = false;

    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        if k > 0 {
            for i in 0..2 {
                let disturbance = coarse[i].step(t, &mut rng);
                offload[i] += mirror[i] * dt / config.offload_time_constant;
                body[i] = disturbance + offload[i];
                tilt[i].step(&mut rng);
                let reading = body[i] + imu[i].step(&mut rng);
                estimate[i] -= reading - imu_prev[i];
                imu_prev[i] = reading;
            }
        }
        let beacon = [-body[0] + tilt[0].value(), -body[1] + tilt[1].value()];

        if let Some(frame) = pending.take_if(|f| f.arrives_at == k) {
            for i in 0..2 {
                estimate[i] += config.tracker_gain * (frame.measured[i] - frame.estimate_at_exposure[i]);
            }
        }

        if k % SUBSTEPS_PER_FRAME == 0 {
            match measure_beacon(tracker, beacon, mirror, estimate, &mut rng) {
                Some(measured) => {
                    failed_run = 0;
                    pending = Some(PendingFrame {
                        arrives_at: k + SUBSTEPS_PER_FRAME,
                        measured,
                        estimate_at_exposure: estimate,
                    });
                }
                None => failed_run += SUBSTEPS_PER_FRAME,
            }
        }

        let offset = offsets.at(t)?;
        let mut saturated = false;
        let mut residual = [0.0; 2];
        for i in 0..2 {
            let command = quantize(estimate[i], config.steering.quantization);
            let moved = mirror[i] + actuator_gain * (command - mirror[i]);
            let total = moved + offset[i];
            let clamped = total.clamp(-limit, limit);
            saturated |= clamped != total;
            mirror[i] = clamped - offset[i];
            let required = -body[i] + config.turbulence_rejection * tilt[i].value();
            residual[i] = mirror[i] - required;
        }

        if saturated {
            saturated_run += 1;
            if !was_saturated {
                saturations += 1;
            }
        } else {
            saturated_run = 0;
        }
        was_saturated = saturated;

        if k % SUBSTEPS_PER_FRAME == 0 {
            series.push(ResidualSample {
                epoch: t,
                x: residual[0],
                y: residual[1],
            });
            let open = [
                -(body[0] - offload[0]) + config.turbulence_rejection * tilt[0].value(),
                -(body[1] - offload[1]) + config.turbulence_rejection * tilt[1].value(),
            ];
            open_sq += open[0] * open[0] + open[1] * open[1];
            open_n += 1;
        }

        if saturated_run > lock_loss_steps || failed_run > lock_loss_steps {
            lock_lost = true;
            break;
        }
    }

    Ok(PointingRun::summarise(frame_dt, series, open_sq, open_n, saturations, lock_lost))
}

/// One tracker frame: render the beacon in a window centred on the predicted
/// position, centroid it, and return the measured beacon direction.
fn measure_beacon(
    tracker: &BeaconTrackerModel,
    beacon: [f64; 2],
    mirror: [f64; 2],
    estimate: [f64; 2],
    rng: &mut ChaCha8Rng,
) -> Option<[f64; 2]> {
    let scale = tracker.pixel_pitch_angle;
    let centre = (TRACKER_WINDOW_PX / 2) as f64;
    let predicted = [(estimate[0] - mirror[0]) / scale, (estimate[1] - mirror[1]) / scale];
    let origin = [predicted[0].round(), predicted[1].round()];
    let spot = [
        (beacon[0] - mirror[0]) / scale - origin[0] + centre,
        (beacon[1] - mirror[1]) / scale - origin[1] + centre,
    ];
    let window = TRACKER_WINDOW_PX as f64;
    if !(spot[0] > -1.0 && spot[0] < window && spot[1] > -1.0 && spot[1] < window) {
        return None;
    }
    let mut img = render_spot(
        TRACKER_WINDOW_PX,
        TRACKER_WINDOW_PX,
        spot[0],
        spot[1],
        tracker.psf_sigma,
        tracker.signal_photons_per_frame,
    );
    add_noise(&mut img, tracker.read_noise, tracker.shot_noise, rng);
    let c = centroid(&img, tracker.psf_sigma, tracker.read_noise).ok()?;
    Some([
        mirror[0] + (c.x - centre + origin[0]) * scale,
        mirror[1] + (c.y - centre + origin[1]) * scale,
    ])
}

/// Mean pointing loss over a run's residuals for `source`'s far-field profile, dB.
pub fn jitter_summary_to_loss(run: &PointingRun, source: &OpticalSourceGeometry) -> Result<f64> {
    if run.lock_lost {
        return Err(ModelError::PointingLockLost);
    }
    residual_loss(&run.residual_error_series, source.beam_half_angle())
}

/// Mean of exp(−2r²/w²) over `series`, in dB.
pub fn residual_loss(series: &[ResidualSample], beam_half_angle: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(ModelError::invalid("residual_error_series", "must be non-empty"));
    }
    let mean = series.iter().map(|s| offset_intensity(s.radial(), beam_half_angle)).sum::<f64>() / series.len() as f64;
    Ok(10.0 * mean.log10() + 0.0)
}
