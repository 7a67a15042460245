use nalgebra::Vector3;

use super::atmosphere::density_unchecked;
use super::solar::{cycle_anchor, SolarActivity};
use super::{OrbitState, SpacecraftBody};
use crate::constants::{EARTH_EQUATORIAL_RADIUS, EARTH_ROTATION_RATE, J2, MU_EARTH};
use crate::error::{ensure_finite, ModelError, Result};
use crate::time::ScenarioClock;

/// Propagation stops once the altitude drops below this, m.
pub const DEORBIT_FLOOR_M: f64 = 120e3;

/// Integration sub-steps never exceed this fraction of the orbital period.
const MAX_SUBSTEP_FRACTION: f64 = 1.0 / 600.0;
/// Requested output steps above this fraction of the period are rejected.
const MAX_STEP_FRACTION: f64 = 1.0 / 20.0;

/// Force-model settings shared by a propagation run.
#[derive(Debug, Clone, Copy)]
pub struct PropagationSettings {
    pub body: SpacecraftBody,
    pub solar: SolarActivity,
    pub clock: ScenarioClock,
    pub drag_enabled: bool,
    /// Switch for the J2 term; off only for two-body checks.
    pub j2_enabled: bool,
    pub deorbit_floor_m: f64,
}

impl PropagationSettings {
    pub fn new(body: SpacecraftBody, solar: SolarActivity, drag_enabled: bool) -> Self {
        Self {
            body,
            solar,
            clock: ScenarioClock::default(),
            drag_enabled,
            j2_enabled: true,
            deorbit_floor_m: DEORBIT_FLOOR_M,
        }
    }

    pub fn with_clock(mut self, clock: ScenarioClock) -> Self {
        self.clock = clock;
        self
    }

    fn f10_7(&self, epoch: f64) -> f64 {
        self.solar.f10_7(self.clock.years_since(cycle_anchor(), epoch))
    }

    /// Total acceleration (gravity + J2 + drag), m/s^2.
    pub fn acceleration(&self, epoch: f64, r: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        let rn = r.norm();
        let r2 = rn * rn;
        let mut a = -MU_EARTH / (r2 * rn) * r;

        if self.j2_enabled {
            let z2_r2 = r.z * r.z / r2;
            let k = 1.5 * J2 * MU_EARTH * EARTH_EQUATORIAL_RADIUS * EARTH_EQUATORIAL_RADIUS
                / (r2 * r2 * rn);
            a += k * Vector3::new(
                r.x * (5.0 * z2_r2 - 1.0),
                r.y * (5.0 * z2_r2 - 1.0),
                r.z * (5.0 * z2_r2 - 3.0),
            );
        }

        if self.drag_enabled {
            let altitude = rn - EARTH_EQUATORIAL_RADIUS;
            let rho = density_unchecked(altitude, self.f10_7(epoch));
            // Atmosphere co-rotates rigidly with the Earth.
            let v_atm = Vector3::new(-EARTH_ROTATION_RATE * r.y, EARTH_ROTATION_RATE * r.x, 0.0);
            let v_rel = v - v_atm;
            a -= 0.5 * rho * self.body.ballistic_factor() * v_rel.norm() * v_rel;
        }
        a
    }

    fn rk4(&self, s: &OrbitState, h: f64) -> OrbitState {
        let (t, r, v) = (s.epoch, s.position, s.velocity);
        let a1 = self.acceleration(t, &r, &v);
        let (r2, v2) = (r + 0.5 * h * v, v + 0.5 * h * a1);
        let a2 = self.acceleration(t + 0.5 * h, &r2, &v2);
        let (r3, v3) = (r + 0.5 * h * v2, v + 0.5 * h * a2);
        let a3 = self.acceleration(t + 0.5 * h, &r3, &v3);
        let (r4, v4) = (r + h * v3, v + h * a3);
        let a4 = self.acceleration(t + h, &r4, &v4);
        OrbitState::new(
            t + h,
            r + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4),
            v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        )
    }
}

/// Lazy fixed-step RK4 propagation.
///
/// Yields the initial state first, then one state per output step. Each
/// output step is split into equal sub-steps no longer than 1/600 of the
/// initial period. Stops after `duration` or, with a terminal state flagged
/// by [`Propagator::decayed`], once the altitude falls below the floor.
#[derive(Debug, Clone)]
pub struct Propagator {
    settings: PropagationSettings,
    current: OrbitState,
    step: f64,
    substeps: u32,
    remaining_steps: u64,
    started: bool,
    decayed: bool,
}

impl Propagator {
    pub fn new(
        initial: OrbitState,
        settings: PropagationSettings,
        duration: f64,
        step: f64,
    ) -> Result<Self> {
        initial.validate()?;
        settings.body.validate()?;
        ensure_finite("duration", duration)?;
        ensure_finite("step", step)?;
        if !(step > 0.0) {
            return Err(ModelError::invalid("step", "must be positive"));
        }
        if duration < step {
            return Err(ModelError::invalid("duration", "must be at least one step"));
        }
        if initial.altitude() < settings.deorbit_floor_m {
            return Err(ModelError::invalid(
                "initial altitude",
                "must be above the deorbit floor",
            ));
        }
        let period = initial.period();
        if !period.is_finite() {
            return Err(ModelError::invalid("initial state", "orbit is not bound"));
        }
        let limit = period * MAX_STEP_FRACTION;
        if step > limit {
            return Err(ModelError::StepTooLarge {
                step_s: step,
                limit_s: limit,
            });
        }
        let substeps = (step / (period * MAX_SUBSTEP_FRACTION)).ceil().max(1.0) as u32;
        Ok(Self {
            settings,
            current: initial,
            step,
            substeps,
            remaining_steps: (duration / step + 1e-9).floor() as u64,
            started: false,
            decayed: false,
        })
    }

    /// True once the trajectory ended below the deorbit floor.
    pub fn decayed(&self) -> bool {
        self.decayed
    }

    pub fn settings(&self) -> &PropagationSettings {
        &self.settings
    }
}

impl Iterator for Propagator {
    type Item = OrbitState;

    fn next(&mut self) -> Option<OrbitState> {
        if !self.started {
            self.started = true;
            return Some(self.current);
        }
        if self.decayed || self.remaining_steps == 0 {
            return None;
        }
        let h = self.step / f64::from(self.substeps);
        let t0 = self.current.epoch;
        let mut s = self.current;
        for i in 0..self.substeps {
            s = self.settings.rk4(&s, h);
            // Keep epochs on the exact output grid.
            if i + 1 == self.substeps {
                s.epoch = t0 + self.step;
            }
        }
        self.current = s;
        self.remaining_steps -= 1;
        if s.altitude() < self.settings.deorbit_floor_m {
            self.decayed = true;
        }
        Some(s)
    }
}

/// Materialized propagation result.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<OrbitState>,
    /// The last state is the first one found below the deorbit floor.
    pub decayed: bool,
}

/// Propagate `state` for `duration` seconds, sampling every `step` seconds.
pub fn propagate(
    state: OrbitState,
    settings: PropagationSettings,
    duration: f64,
    step: f64,
) -> Result<Trajectory> {
    let mut prop = Propagator::new(state, settings, duration, step)?;
    let states: Vec<_> = prop.by_ref().collect();
    Ok(Trajectory {
        states,
        decayed: prop.decayed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::SECONDS_PER_DAY;

    fn settings(drag: bool) -> PropagationSettings {
        PropagationSettings::new(SpacecraftBody::default(), SolarActivity::Moderate, drag)
    }

    #[test]
    fn two_body_closure_after_one_period() {
        let s0 = OrbitState::circular(0.0, 400e3, 0.0, 0.0, 0.0);
        let period = std::f64::consts::TAU * (s0.radius().powi(3) / MU_EARTH).sqrt();
        let mut two_body = settings(false);
        two_body.j2_enabled = false;
        let traj = propagate(s0, two_body, period, period / 100.0).unwrap();
        let end = traj.states.last().unwrap();
        assert!((end.epoch - period).abs() < 1e-6);
        let miss = (end.position - s0.position).norm();
        assert!(miss < 1.0, "closure miss {miss} m");
    }

    #[test]
    fn rejects_large_steps_and_bad_input() {
        let s0 = OrbitState::circular(0.0, 400e3, 51.6, 0.0, 0.0);
        let err = Propagator::new(s0, settings(false), 10_000.0, 400.0).unwrap_err();
        assert!(matches!(err, ModelError::StepTooLarge { .. }));
        let mut bad = s0;
        bad.position.x = f64::NAN;
        assert!(Propagator::new(bad, settings(false), 100.0, 10.0).is_err());
        assert!(Propagator::new(s0, settings(false), 5.0, 10.0).is_err());
        assert!(Propagator::new(s0, settings(false), 100.0, 0.0).is_err());
    }

    #[test]
    fn drag_decreases_semi_major_axis_over_a_month() {
        let s0 = OrbitState::circular(0.0, 400e3, 51.6, 0.0, 0.0);
        let mut prev = s0.energy_semi_major_axis();
        let first = prev;
        let mut n = 0usize;
        for s in Propagator::new(s0, settings(true), 30.0 * SECONDS_PER_DAY, 60.0).unwrap() {
            let a = s.energy_semi_major_axis();
            assert!(a <= prev + 1e-6, "semi-major axis rose at t={}", s.epoch);
            prev = a;
            n += 1;
        }
        assert!(n > 40_000);
        assert!(prev < first - 500.0, "decay {} m", first - prev);
    }

    #[test]
    fn terminates_below_floor() {
        let s0 = OrbitState::circular(0.0, 150e3, 51.6, 0.0, 0.0);
        let traj = propagate(s0, settings(true), 30.0 * SECONDS_PER_DAY, 30.0).unwrap();
        assert!(traj.decayed);
        assert!(traj.states.last().unwrap().altitude() < DEORBIT_FLOOR_M);
        assert!(traj.states[traj.states.len() - 2].altitude() >= DEORBIT_FLOOR_M);
    }
}
