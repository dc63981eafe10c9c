use std::f64::consts::TAU;

use super::photometric::hsv_to_rgb;
use super::Image;
use crate::seed::hash64;

pub const SCENE_SIZE: usize = 128;

const OCTAVES: [(f64, f64); 6] = [(32.0, 0.16), (16.0, 0.1), (8.0, 0.065), (4.0, 0.04), (2.0, 0.028), (1.0, 0.02)];

fn lattice(salt: u8, i: i64, j: i64) -> f64 {
    let h = hash64(&[&[salt], &i.to_le_bytes(), &j.to_le_bytes()]);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smoothly interpolated lattice noise in [-1, 1] with cells of `cell` px.
fn value_noise(salt: u8, y: f64, x: f64, cell: f64) -> f64 {
    let (gy, gx) = (y / cell, x / cell);
    let (i, j) = (gy.floor() as i64, gx.floor() as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (ty, tx) = (s(gy - i as f64), s(gx - j as f64));
    let top = lattice(salt, i, j) + tx * (lattice(salt, i, j + 1) - lattice(salt, i, j));
    let bot = lattice(salt, i + 1, j) + tx * (lattice(salt, i + 1, j + 1) - lattice(salt, i + 1, j));
    top + ty * (bot - top)
}

/// Procedural 128×128 test image used for severity measurements.
///
/// Multi-octave value noise (amplitude falling with frequency, roughly like
/// natural photographs) plus concentric rings and a hard-edged disk. The
/// content has no dominant orientation, so kernels with a random direction
/// behave alike for every draw. Saturation stays below 0.4, so the saturate
/// kernel's stronger severities are not clipped early.
pub fn reference_scene() -> Image {
    let n = SCENE_SIZE as f64;
    let mut data = Vec::with_capacity(SCENE_SIZE * SCENE_SIZE * 3);
    for y in 0..SCENE_SIZE {
        for x in 0..SCENE_SIZE {
            let (fy, fx) = (y as f64, x as f64);
            let (u, v) = (fx / n, fy / n);
            let mut value = 0.5;
            for (salt, &(cell, amp)) in OCTAVES.iter().enumerate() {
                value += amp * value_noise(salt as u8, fy, fx, cell);
            }
            let r = ((u - 0.62).powi(2) + (v - 0.4).powi(2)).sqrt();
            value += 0.06 * (TAU * 7.0 * r).cos();
            if ((u - 0.28).powi(2) + (v - 0.7).powi(2)).sqrt() < 0.14 {
                value += 0.15;
            }
            let hue = (0.55 + 0.5 * value_noise(100, fy, fx, 48.0)).rem_euclid(1.0);
            let sat = 0.2 + 0.15 * value_noise(101, fy, fx, 24.0);
            data.extend_from_slice(&hsv_to_rgb([hue, sat, value.clamp(0.05, 0.95)]));
        }
    }
    Image::from_raw_clamped(SCENE_SIZE, SCENE_SIZE, data)
}

/// Mean squared difference over all values. Panics on shape mismatch.
pub fn mse(a: &Image, b: &Image) -> f64 {
    assert_eq!((a.height(), a.width()), (b.height(), b.width()), "image shapes differ");
    let n = a.data().len() as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}

/// Peak signal-to-noise ratio in dB for unit peak; infinite for equal
/// images.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    let m = mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    }
}
