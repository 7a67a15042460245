use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use statrs::function::erf::erf;

use crate::error::{ModelError, Result};

/// Detection threshold on the 3×3 box sum, in units of its read-noise σ.
const DETECTION_SIGMAS: f64 = 5.0;
/// Half-width of the centroiding window, pixels.
const WINDOW_RADIUS: usize = 5;
/// Gaussian weight width relative to the PSF σ.
const WEIGHT_WIDTH: f64 = 1.2;
const MAX_ITERATIONS: usize = 50;

/// Row-major grid of photo-electron counts. Pixel (i, j) has its centre at
/// x = i, y = j.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn box3(&self, x: usize, y: usize) -> f64 {
        let mut sum = 0.0;
        for yy in y.saturating_sub(1)..=(y + 1).min(self.height - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(self.width - 1) {
                sum += self.get(xx, yy);
            }
        }
        sum
    }
}

/// Expected counts of a pixel-integrated Gaussian spot.
pub fn render_spot(width: usize, height: usize, x0: f64, y0: f64, psf_sigma: f64, electrons: f64) -> Image {
    let s = psf_sigma * std::f64::consts::SQRT_2;
    let profile = |n: usize, c: f64| -> Vec<f64> {
        (0..n)
            .map(|i| 0.5 * (erf((i as f64 + 0.5 - c) / s) - erf((i as f64 - 0.5 - c) / s)))
            .collect()
    };
    let px = profile(width, x0);
    let py = profile(height, y0);
    let mut img = Image::zeros(width, height);
    for (j, fy) in py.iter().enumerate() {
        for (i, fx) in px.iter().enumerate() {
            img.data[j * width + i] = electrons * fx * fy;
        }
    }
    img
}

/// Replace expected counts with a Poisson draw and add Gaussian read noise.
pub fn add_noise<R: Rng + ?Sized>(img: &mut Image, read_noise: f64, shot_noise: bool, rng: &mut R) {
    let read = (read_noise > 0.0).then(|| Normal::new(0.0, read_noise).expect("finite read noise"));
    for v in &mut img.data {
        if shot_noise && *v > 0.0 {
            *v = Poisson::new(*v).expect("positive mean").sample(rng);
        }
        if let Some(n) = &read {
            *v += n.sample(rng);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
    /// Window signal over its root-sum-square noise.
    pub snr: f64,
}

/// Sub-pixel spot position by iteratively Gaussian-weighted centroiding.
///
/// The spot is located as the brightest 3×3 box sum, which must clear
/// the read-noise threshold. The weighted centroid is then iterated inside
/// an 11×11 window around it.
pub fn centroid(img: &Image, psf_sigma: f64, read_noise: f64) -> Result<Centroid> {
    if img.width == 0 || img.height == 0 || img.data.len() != img.width * img.height {
        return Err(ModelError::invalid("image", "empty or inconsistent dimensions"));
    }
    if !(psf_sigma > 0.0) {
        return Err(ModelError::invalid("psf_sigma", "must be positive"));
    }
    let threshold = DETECTION_SIGMAS * 3.0 * read_noise.max(0.0);
    let (mut px, mut py, mut best) = (0, 0, f64::NEG_INFINITY);
    for y in 0..img.height {
        for x in 0..img.width {
            let b = img.box3(x, y);
            if b > best {
                (px, py, best) = (x, y, b);
            }
        }
    }
    if !(best > threshold && best > 0.0) {
        return Err(ModelError::LockLost);
    }

    let x_range = px.saturating_sub(WINDOW_RADIUS)..=(px + WINDOW_RADIUS).min(img.width - 1);
    let y_range = py.saturating_sub(WINDOW_RADIUS)..=(py + WINDOW_RADIUS).min(img.height - 1);
    let inv2s2 = 1.0 / (2.0 * (WEIGHT_WIDTH * psf_sigma).powi(2));
    // Pixel block around the peak, zero outside the image. Moments are taken
    // about the peak pixel and summed in mirrored pairs so a symmetric spot
    // cancels exactly.
    const N: usize = 2 * WINDOW_RADIUS + 1;
    let r = WINDOW_RADIUS as isize;
    let mut block = [[0.0; N]; N];
    for (j, row) in block.iter_mut().enumerate() {
        let y = py as isize + j as isize - r;
        for (i, v) in row.iter_mut().enumerate() {
            let x = px as isize + i as isize - r;
            if x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height {
                *v = img.get(x as usize, y as usize);
            }
        }
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for _ in 0..MAX_ITERATIONS {
        let weights = |c: f64| -> [f64; N] {
            std::array::from_fn(|i| {
                let d = i as f64 - WINDOW_RADIUS as f64 - c;
                (-d * d * inv2s2).exp()
            })
        };
        let (wx, wy) = (weights(cx), weights(cy));
        let w = |i: usize, j: usize| wx[i] * wy[j] * block[j][i];
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        let c = WINDOW_RADIUS;
        for j in 0..N {
            s += w(c, j);
            for d in 1..=c {
                s += w(c + d, j) + w(c - d, j);
                sx += d as f64 * (w(c + d, j) - w(c - d, j));
            }
        }
        for i in 0..N {
            for d in 1..=c {
                sy += d as f64 * (w(i, c + d) - w(i, c - d));
            }
        }
        if !(s > 0.0) {
            return Err(ModelError::LockLost);
        }
        let (nx, ny) = (sx / s, sy / s);
        let moved = (nx - cx).abs() + (ny - cy).abs();
        (cx, cy) = (nx, ny);
        if moved < 1e-9 {
            break;
        }
    }
    let (cx, cy) = (px as f64 + cx, py as f64 + cy);

    let mut signal = 0.0;
    let mut pixels = 0usize;
    for y in y_range.clone() {
        for x in x_range.clone() {
            signal += img.get(x, y);
            pixels += 1;
        }
    }
    let noise = (signal.max(0.0) + pixels as f64 * read_noise * read_noise).sqrt();
    let snr = if noise > 0.0 { signal / noise } else { f64::INFINITY };
    Ok(Centroid { x: cx, y: cy, snr })
}
