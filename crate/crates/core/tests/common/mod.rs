//! Synthetic videos shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgpnn::{Shape3, VideoTensor};

pub fn shape(t: usize, h: usize, w: usize) -> Shape3 {
    Shape3::new(t, h, w).unwrap()
}

/// Independent uniform values in [-1, 1).
pub fn noise_video(s: Shape3, c: usize, seed: u64) -> VideoTensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    VideoTensor::from_fn(s, c, |_, _, _, _| r.random_range(-1.0..1.0)).unwrap()
}

/// Smooth RGB content: drifting color gratings plus a few moving blobs.
/// Frequencies are given relative to the frame size, so the same seed looks
/// alike at every resolution.
pub fn textured_clip(s: Shape3, seed: u64) -> VideoTensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let scale = s.w as f32 / 128.0;
    let gratings: Vec<[f32; 8]> = (0..5)
        .map(|_| {
            [
                r.random_range(1.0..6.0) / s.h as f32,
                r.random_range(1.0..8.0) / s.w as f32,
                r.random_range(-1.5..1.5) * scale,
                r.random_range(0.0..std::f32::consts::TAU),
                r.random_range(-0.35..0.35),
                r.random_range(-0.35..0.35),
                r.random_range(-0.35..0.35),
                0.0,
            ]
        })
        .collect();
    let blobs: Vec<[f32; 8]> = (0..3)
        .map(|_| {
            [
                r.random_range(0.2..0.8) * s.h as f32,
                r.random_range(0.2..0.8) * s.w as f32,
                r.random_range(-1.0..1.0) * scale,
                r.random_range(-2.0..2.0) * scale,
                r.random_range(4.0..9.0) * scale,
                r.random_range(-0.6..0.6),
                r.random_range(-0.6..0.6),
                r.random_range(-0.6..0.6),
            ]
        })
        .collect();
    VideoTensor::from_fn(s, 3, |t, y, x, c| {
        let (t, y, x) = (t as f32, y as f32, x as f32);
        let mut v = 0.0;
        for g in &gratings {
            let phase = std::f32::consts::TAU * (g[0] * y + g[1] * (x - g[2] * t)) + g[3];
            v += g[4 + c] * phase.sin();
        }
        for b in &blobs {
            let (cy, cx) = (b[0] + b[2] * t, b[1] + b[3] * t);
            let d2 = (y - cy).powi(2) + (x - cx).powi(2);
            v += b[5 + c] * (-d2 / (2.0 * b[4] * b[4])).exp();
        }
        v.clamp(-0.95, 0.95)
    })
    .unwrap()
}

pub const RED: [f32; 3] = [0.8, -0.8, -0.8];
pub const GREEN: [f32; 3] = [-0.8, 0.8, -0.8];

/// Left half red, right half green, with mild deterministic texture.
pub fn red_green(s: Shape3) -> VideoTensor {
    VideoTensor::from_fn(s, 3, |t, y, x, c| {
        let base = if x < s.w / 2 { RED[c] } else { GREEN[c] };
        base + 0.08 * (((t * 7 + y * 5 + x * 3 + c) % 5) as f32 / 4.0 - 0.5)
    })
    .unwrap()
}

/// Squares `(top, left, size, speed)` moving right on a dark background.
pub fn moving_squares(
    s: Shape3,
    squares: &[(usize, usize, usize, usize)],
    colors: &[[f32; 3]],
) -> VideoTensor {
    VideoTensor::from_fn(s, 3, |t, y, x, c| {
        for (i, &(top, left, size, speed)) in squares.iter().enumerate() {
            let l = left + speed * t;
            if y >= top && y < top + size && x >= l && x < l + size {
                return colors[i][c];
            }
        }
        -0.9
    })
    .unwrap()
}

pub fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}
