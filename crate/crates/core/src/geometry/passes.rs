use nalgebra::Vector3;
use serde::Serialize;

use super::{Observer, TopoPoint};
use crate::error::{ModelError, Result};
use crate::orbit::OrbitState;

/// Coarsest sample spacing accepted by the pass finder, s.
pub const MAX_PASS_CADENCE_S: f64 = 10.0;
/// Station night: Sun below civil twilight, degrees.
pub const NIGHT_SUN_ELEVATION_DEG: f64 = -6.0;
const EDGE_TOLERANCE_S: f64 = 1e-3;

/// One pass above the station's tracking floor.
#[derive(Debug, Clone, Serialize)]
pub struct PassEvent {
    pub rise: f64,
    pub culmination: f64,
    pub set: f64,
    /// Degrees.
    pub max_elevation: f64,
    /// set − rise, s.
    pub duration_above_track_floor: f64,
    /// Every track point was in eclipse with the station in darkness.
    pub eclipse_throughout: bool,
    /// Rise point, samples above the floor, culmination and set point, in
    /// time order.
    #[serde(skip)]
    pub track: Vec<TopoPoint>,
}

impl PassEvent {
    /// Track points at or above `elevation_deg`.
    pub fn above(&self, elevation_deg: f64) -> impl Iterator<Item = &TopoPoint> {
        self.track.iter().filter(move |p| p.elevation >= elevation_deg)
    }

    /// Time spent above `elevation_deg`, estimated from the track samples.
    pub fn time_above(&self, elevation_deg: f64) -> f64 {
        self.track
            .windows(2)
            .filter(|w| w[0].elevation >= elevation_deg && w[1].elevation >= elevation_deg)
            .map(|w| w[1].epoch - w[0].epoch)
            .sum()
    }
}

/// Cubic Hermite interpolation between two samples of the same trajectory.
fn interpolate(a: &OrbitState, b: &OrbitState, t: f64) -> OrbitState {
    let h = b.epoch - a.epoch;
    let s = (t - a.epoch) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let position = h00 * a.position + h10 * h * a.velocity + h01 * b.position + h11 * h * b.velocity;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    let velocity: Vector3<f64> =
        d00 * a.position + d10 * a.velocity + d01 * b.position + d11 * b.velocity;
    OrbitState::new(t, position, velocity)
}

/// Streaming pass detector. Feed states in time order with [`push`], then
/// call [`finish`].
///
/// [`push`]: PassFinder::push
/// [`finish`]: PassFinder::finish
#[derive(Debug)]
pub struct PassFinder<'a> {
    observer: &'a Observer,
    require_eclipse: bool,
    prev: Option<(OrbitState, f64)>,
    open: Option<OpenPass>,
    passes: Vec<PassEvent>,
}

#[derive(Debug)]
struct OpenPass {
    states: Vec<OrbitState>,
    rise: TopoPoint,
}

impl<'a> PassFinder<'a> {
    pub fn new(observer: &'a Observer, require_eclipse: bool) -> Self {
        Self {
            observer,
            require_eclipse,
            prev: None,
            open: None,
            passes: Vec::new(),
        }
    }

    pub fn push(&mut self, state: &OrbitState) -> Result<()> {
        let floor = self.observer.station.min_track_elevation;
        let elev = self.observer.elevation(state);
        if let Some((prev, prev_elev)) = self.prev {
            let cadence = state.epoch - prev.epoch;
            if !(cadence > 0.0) {
                return Err(ModelError::invalid("states", "epochs must increase strictly"));
            }
            if cadence > MAX_PASS_CADENCE_S + 1e-9 {
                return Err(ModelError::CadenceTooCoarse {
                    cadence_s: cadence,
                    limit_s: MAX_PASS_CADENCE_S,
                });
            }
            if prev_elev <= floor && elev > floor {
                let t = self.crossing(&prev, state, floor);
                let rise = self.observer.topocentric(&interpolate(&prev, state, t));
                self.open = Some(OpenPass {
                    states: vec![prev, *state],
                    rise,
                });
            } else if let Some(open) = self.open.as_mut() {
                open.states.push(*state);
                if elev <= floor {
                    let open = self.open.take().unwrap();
                    self.close(open, &prev, state, floor);
                }
            }
        }
        self.prev = Some((*state, elev));
        Ok(())
    }

    /// Passes closed so far.
    pub fn completed(&self) -> &[PassEvent] {
        &self.passes
    }

    /// Passes still in progress at the end of the data are dropped.
    pub fn finish(self) -> Vec<PassEvent> {
        self.passes
    }

    fn crossing(&self, a: &OrbitState, b: &OrbitState, level: f64) -> f64 {
        let f = |t: f64| self.observer.elevation(&interpolate(a, b, t)) - level;
        let (mut lo, mut hi) = (a.epoch, b.epoch);
        let rising = f(lo) < f(hi);
        while hi - lo > EDGE_TOLERANCE_S {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn close(&mut self, open: OpenPass, prev: &OrbitState, cur: &OrbitState, floor: f64) {
        let set_t = self.crossing(prev, cur, floor);
        let set = self.observer.topocentric(&interpolate(prev, cur, set_t));
        let states = &open.states;

        // Samples strictly inside (rise, set).
        let inner = &states[1..states.len() - 1];
        let (peak_idx, _) = inner
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1, self.observer.elevation(s)))
            .fold((1, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best });
        let culm_state = self.refine_peak(states, peak_idx, open.rise.epoch, set_t);
        let culm = self.observer.topocentric(&culm_state);

        let mut track = Vec::with_capacity(inner.len() + 3);
        track.push(open.rise);
        let mut culm_inserted = false;
        for s in inner {
            if !culm_inserted && s.epoch > culm.epoch {
                track.push(culm);
                culm_inserted = true;
            }
            if (s.epoch - culm.epoch).abs() > EDGE_TOLERANCE_S {
                track.push(self.observer.topocentric(s));
            }
        }
        if !culm_inserted {
            track.push(culm);
        }
        track.push(set);

        let max_elevation = track.iter().map(|p| p.elevation).fold(f64::NEG_INFINITY, f64::max);
        if max_elevation < self.observer.station.min_experiment_culmination {
            return;
        }
        let eclipse_throughout = track.iter().all(|p| {
            p.in_eclipse && self.observer.sun_elevation(p.epoch) < NIGHT_SUN_ELEVATION_DEG
        });
        if self.require_eclipse && !eclipse_throughout {
            return;
        }
        self.passes.push(PassEvent {
            rise: open.rise.epoch,
            culmination: culm.epoch,
            set: set.epoch,
            max_elevation,
            duration_above_track_floor: set.epoch - open.rise.epoch,
            eclipse_throughout,
            track,
        });
    }

    /// Golden-section search for the elevation maximum around sample `i`.
    fn refine_peak(&self, states: &[OrbitState], i: usize, t_min: f64, t_max: f64) -> OrbitState {
        let lo_t = states[i - 1].epoch.max(t_min);
        let hi_t = states[i + 1].epoch.min(t_max);
        let eval = |t: f64| {
            let s = if t <= states[i].epoch {
                interpolate(&states[i - 1], &states[i], t)
            } else {
                interpolate(&states[i], &states[i + 1], t)
            };
            (self.observer.elevation(&s), s)
        };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo_t, hi_t);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (eval(c).0, eval(d).0);
        while b - a > EDGE_TOLERANCE_S {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = eval(c).0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = eval(d).0;
            }
        }
        let best = eval(0.5 * (a + b));
        if best.0 >= self.observer.elevation(&states[i]) {
            best.1
        } else {
            states[i]
        }
    }
}

/// All passes in `states` culminating at or above the station's experiment
/// threshold. With `require_eclipse`, only passes flown entirely in shadow
/// during station night are kept.
pub fn find_passes(
    states: &[OrbitState],
    observer: &Observer,
    require_eclipse: bool,
) -> Result<Vec<PassEvent>> {
    let mut finder = PassFinder::new(observer, require_eclipse);
    for s in states {
        finder.push(s)?;
    }
    Ok(finder.finish())
}
