use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Stationary first-order Gauss-Markov process, started from its stationary
/// distribution.
#[derive(Debug, Clone)]
pub(crate) struct GaussMarkov {
    value: f64,
    decay: f64,
    drive: f64,
}

impl GaussMarkov {
    pub(crate) fn new<R: Rng + ?Sized>(sigma: f64, correlation_time: f64, dt: f64, rng: &mut R) -> Self {
        let decay = if correlation_time > 0.0 { (-dt / correlation_time).exp() } else { 0.0 };
        Self {
            value: sigma * normal(rng),
            decay,
            drive: sigma * (1.0 - decay * decay).sqrt(),
        }
    }

    pub(crate) fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        self.value = self.decay * self.value + self.drive * normal(rng);
        self.value
    }

    pub(crate) fn value(&self) -> f64 {
        self.value
    }
}

/// Coarse body-pointing error along one axis: slow sinusoidal bias drift,
/// low-pass coloured noise and a clamped random walk.
#[derive(Debug, Clone)]
pub(crate) struct CoarseAxis {
    bias: f64,
    omega: f64,
    phase: f64,
    coloured: GaussMarkov,
    walk: f64,
    walk_step: f64,
    walk_cap: f64,
}

impl CoarseAxis {
    pub(crate) fn new<R: Rng + ?Sized>(model: &super::CoarsePointingModel, dt: f64, rng: &mut R) -> Self {
        let corner_time = 1.0 / (2.0 * std::f64::consts::PI * super::COARSE_NOISE_CORNER_HZ);
        Self {
            bias: model.bias,
            omega: 2.0 * std::f64::consts::PI / model.drift_timescale,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            coloured: GaussMarkov::new(model.sigma, corner_time, dt, rng),
            walk: 0.0,
            walk_step: model.buffeting_amplitude * (dt / model.drift_timescale).sqrt(),
            walk_cap: model.buffeting_amplitude,
        }
    }

    pub(crate) fn step<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> f64 {
        let coloured = self.coloured.step(rng);
        if self.walk_cap > 0.0 {
            self.walk = (self.walk + self.walk_step * normal(rng)).clamp(-self.walk_cap, self.walk_cap);
        }
        self.bias * (self.omega * t + self.phase).sin() + coloured + self.walk
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_markov_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = GaussMarkov::new(2.0, 0.05, 1e-3, &mut rng);
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = p.step(&mut rng);
            s += v;
            s2 += v * v;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        assert!((var.sqrt() - 2.0).abs() < 0.1, "{}", var.sqrt());
    }

    #[test]
    fn buffeting_respects_cap() {
        let model = super::super::CoarsePointingModel {
            bias: 0.0,
            sigma: 0.0,
            drift_timescale: 1.0,
            buffeting_amplitude: 5.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut axis = CoarseAxis::new(&model, 0.01, &mut rng);
        for k in 0..100_000 {
            assert!(axis.step(k as f64 * 0.01, &mut rng).abs() <= 5.0);
        }
    }
}
