//! Separable cubic resampling of videos.
//!
//! Each axis is resampled in turn, temporal first, then height, then width.
//! Output sample `o` of an axis maps to source coordinate
//! `(o + 0.5) * n_in / n_out - 0.5` (pixel centers aligned). The kernel is the
//! Keys cubic with `a = -0.5` (Catmull-Rom). When shrinking an axis the kernel
//! is stretched by `n_in / n_out` so it low-passes before decimation; taps
//! outside the signal replicate the border sample and weights are normalized
//! to sum to one. Results are clamped to the input's per-channel value range.

use rayon::prelude::*;

use crate::error::Result;
use crate::video::{Shape3, VideoTensor};

const CUBIC_A: f64 = -0.5;

/// Keys cubic convolution kernel.
pub fn cubic_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Source taps `(index, weight)` for every output sample of one axis.
pub(crate) fn axis_taps(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f32)>> {
    if n_in == n_out {
        return (0..n_out).map(|o| vec![(o, 1.0)]).collect();
    }
    let scale = n_out as f64 / n_in as f64;
    let kscale = scale.min(1.0);
    let support = 2.0 / kscale;
    (0..n_out)
        .map(|o| {
            let center = (o as f64 + 0.5) / scale - 0.5;
            let lo = (center - support).ceil() as i64;
            let hi = (center + support).floor() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for j in lo..=hi {
                let w = cubic_kernel((j as f64 - center) * kscale);
                if w == 0.0 {
                    continue;
                }
                let src = j.clamp(0, n_in as i64 - 1) as usize;
                match taps.iter_mut().find(|(s, _)| *s == src) {
                    Some(tap) => tap.1 += w,
                    None => taps.push((src, w)),
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.into_iter()
                .map(|(s, w)| (s, (w / total) as f32))
                .collect()
        })
        .collect()
}

/// Resample the middle axis of a `[outer, n_in, inner]` buffer.
fn resample_axis(
    data: &[f32],
    outer: usize,
    n_in: usize,
    inner: usize,
    taps: &[Vec<(usize, f32)>],
) -> Vec<f32> {
    let n_out = taps.len();
    let mut out = vec![0.0f32; outer * n_out * inner];
    out.par_chunks_mut(inner).enumerate().for_each(|(k, dst)| {
        let (b, o) = (k / n_out, k % n_out);
        for &(src, w) in &taps[o] {
            let start = (b * n_in + src) * inner;
            for (d, s) in dst.iter_mut().zip(&data[start..start + inner]) {
                *d += w * s;
            }
        }
    });
    out
}

/// Cubic resize of `v` to `target` (channels unchanged).
pub fn resize_tricubic(v: &VideoTensor, target: Shape3) -> Result<VideoTensor> {
    let target = Shape3::new(target.t, target.h, target.w)?;
    let s = v.shape();
    if s == target {
        return Ok(v.clone());
    }
    let c = v.channels();
    let mut data = v.data().to_vec();
    let mut cur = s;
    if cur.t != target.t {
        data = resample_axis(
            &data,
            1,
            cur.t,
            cur.h * cur.w * c,
            &axis_taps(cur.t, target.t),
        );
        cur.t = target.t;
    }
    if cur.h != target.h {
        data = resample_axis(&data, cur.t, cur.h, cur.w * c, &axis_taps(cur.h, target.h));
        cur.h = target.h;
    }
    if cur.w != target.w {
        data = resample_axis(&data, cur.t * cur.h, cur.w, c, &axis_taps(cur.w, target.w));
    }
    let range = v.channel_range();
    for px in data.chunks_exact_mut(c) {
        for (x, &(lo, hi)) in px.iter_mut().zip(&range) {
            *x = x.clamp(lo, hi);
        }
    }
    Ok(VideoTensor::from_parts(target, c, data))
}
