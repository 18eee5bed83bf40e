//! Dynamic structure fields: quantized optical-flow magnitude.
//!
//! Flow is either loaded from a file or estimated with [`block_flow`], a
//! plain exhaustive block matcher. Magnitudes are clustered with 1-D k-means
//! and each voxel is replaced by `label / k`, labels `1..=k` ordered by
//! cluster center, so larger motion always maps to a larger value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::grayscale;
use crate::video::{Shape3, VideoTensor};

/// Per-voxel displacement `(u, v)` in pixels per frame, stored as a
/// two-channel tensor (`u` along x first).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField(VideoTensor);

impl FlowField {
    pub fn new(v: VideoTensor) -> Result<Self> {
        if v.channels() != 2 {
            return Err(Error::InvalidShape(format!(
                "flow needs 2 channels (u, v), got {}",
                v.channels()
            )));
        }
        Ok(FlowField(v))
    }

    pub fn tensor(&self) -> &VideoTensor {
        &self.0
    }

    pub fn shape(&self) -> Shape3 {
        self.0.shape()
    }
}

/// Per-voxel `sqrt(u^2 + v^2)` as a one-channel tensor.
pub fn flow_magnitude(f: &FlowField) -> VideoTensor {
    let data =
        f.0.data()
            .chunks_exact(2)
            .map(|p| p[0].hypot(p[1]))
            .collect();
    VideoTensor::new(f.shape(), 1, data).expect("finite flow gives finite magnitudes")
}

/// Result of 1-D k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantization {
    /// Cluster centers in ascending order.
    pub centers: Vec<f64>,
    /// Label in `1..=k` per input value.
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
}

impl Quantization {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// `label / k` per input value.
    pub fn values(&self) -> Vec<f32> {
        let k = self.k() as f32;
        self.labels.iter().map(|&l| l as f32 / k).collect()
    }

    /// Label of the nearest center (ties go to the lower label).
    pub fn assign(&self, x: f64) -> usize {
        nearest(&self.centers, x) + 1
    }
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, c) in centers.iter().enumerate().skip(1) {
        if (x - c).abs() < (x - centers[best]).abs() {
            best = i;
        }
    }
    best
}

const MAX_LLOYD_ITERS: usize = 50;

/// Lloyd's algorithm on scalars, initialized at the `(i + 0.5) / k`
/// quantiles of the data. If the data has fewer than `k` distinct values,
/// `k` is reduced to that count (with a warning).
pub fn kmeans_1d(data: &[f32], k: usize) -> Result<Quantization> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::Empty("k-means input"));
    }
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut sorted: Vec<f64> = data.iter().map(|&x| x as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let k = if distinct.len() < k {
        log::warn!(
            "k-means: only {} distinct values, reducing k from {k}",
            distinct.len()
        );
        distinct.len()
    } else {
        k
    };
    let quantiles = |xs: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|i| xs[(((i as f64 + 0.5) / k as f64) * xs.len() as f64) as usize])
            .collect()
    };
    let mut centers = quantiles(&sorted);
    if centers.windows(2).any(|w| w[0] == w[1]) {
        centers = quantiles(&distinct);
    }

    let xs: Vec<f64> = data.iter().map(|&x| x as f64).collect();
    let mut assignment: Vec<usize> = xs.iter().map(|&x| nearest(&centers, x)).collect();
    let sse = |centers: &[f64], a: &[usize]| -> f64 {
        xs.iter()
            .zip(a)
            .map(|(x, &c)| (x - centers[c]).powi(2))
            .sum()
    };
    let mut history = vec![sse(&centers, &assignment)];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in xs.iter().zip(&assignment) {
            sums[c] += x;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        let next: Vec<usize> = xs.iter().map(|&x| nearest(&centers, x)).collect();
        let changed = next != assignment;
        assignment = next;
        history.push(sse(&centers, &assignment));
        if !changed {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    Ok(Quantization {
        centers: order.iter().map(|&c| centers[c]).collect(),
        labels: assignment.iter().map(|&c| rank[c] + 1).collect(),
        sse_history: history,
    })
}

/// Quantize a one-channel magnitude tensor into a dynamic structure field
/// with values in `{1/k, ..., 1}`.
pub fn kmeans_quantize(mags: &VideoTensor, k: usize) -> Result<VideoTensor> {
    Ok(quantize_jointly(&[mags], k)?.pop().expect("one input"))
}

/// Quantize several magnitude tensors with one shared set of clusters.
pub fn quantize_jointly(mags: &[&VideoTensor], k: usize) -> Result<Vec<VideoTensor>> {
    if let Some(m) = mags.iter().find(|m| m.channels() != 1) {
        return Err(Error::InvalidShape(format!(
            "magnitudes need 1 channel, got {}",
            m.channels()
        )));
    }
    let all: Vec<f32> = mags.iter().flat_map(|m| m.data().iter().copied()).collect();
    let values = kmeans_1d(&all, k)?.values();
    let mut out = Vec::with_capacity(mags.len());
    let mut start = 0;
    for m in mags {
        let end = start + m.len();
        out.push(VideoTensor::new(m.shape(), 1, values[start..end].to_vec())?);
        start = end;
    }
    Ok(out)
}

/// Exhaustive block matching between consecutive frames on grayscale.
///
/// Frames are tiled with `block`×`block` blocks (clipped at the borders).
/// For each block, every displacement with `dx^2 + dy^2 <= radius^2` is
/// scored by the sum of squared differences to the next frame (samples
/// outside the frame are clamped to the border); among equal scores the
/// smallest displacement wins. Every voxel of a block gets the block's
/// displacement. The last frame repeats the flow of the one before it.
pub fn block_flow(v: &VideoTensor, block: usize, radius: usize) -> Result<FlowField> {
    if block == 0 || block.is_multiple_of(2) {
        return Err(Error::param("block", format!("must be odd, got {block}")));
    }
    if radius == 0 {
        return Err(Error::param("radius", "must be at least 1"));
    }
    let s = v.shape();
    if s.t < 2 {
        return Err(Error::InvalidShape("flow needs at least two frames".into()));
    }
    let gray = grayscale(v)?;
    let r = radius as i64;
    let mut offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
        .filter(|(dy, dx)| dy * dy + dx * dx <= r * r)
        .collect();
    offsets.sort_by_key(|&(dy, dx)| (dy * dy + dx * dx, dy, dx));

    let frame_len = s.h * s.w;
    let (bh, bw) = (s.h.div_ceil(block), s.w.div_ceil(block));
    let at = |t: usize, y: i64, x: i64| {
        let y = y.clamp(0, s.h as i64 - 1) as usize;
        let x = x.clamp(0, s.w as i64 - 1) as usize;
        gray[t * frame_len + y * s.w + x]
    };
    let mut frames: Vec<Vec<f32>> = (0..s.t - 1)
        .into_par_iter()
        .map(|t| {
            let mut flow = vec![0.0f32; frame_len * 2];
            for by in 0..bh {
                for bx in 0..bw {
                    let (y0, x0) = (by * block, bx * block);
                    let (y1, x1) = ((y0 + block).min(s.h), (x0 + block).min(s.w));
                    let mut best = ((0i64, 0i64), f64::INFINITY);
                    for &(dy, dx) in &offsets {
                        let mut ssd = 0.0f64;
                        for y in y0..y1 {
                            for x in x0..x1 {
                                let d = gray[t * frame_len + y * s.w + x]
                                    - at(t + 1, y as i64 + dy, x as i64 + dx);
                                ssd += d * d;
                            }
                            if ssd >= best.1 {
                                break;
                            }
                        }
                        if ssd < best.1 {
                            best = ((dy, dx), ssd);
                        }
                    }
                    let ((dy, dx), _) = best;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let i = (y * s.w + x) * 2;
                            flow[i] = dx as f32;
                            flow[i + 1] = dy as f32;
                        }
                    }
                }
            }
            flow
        })
        .collect();
    frames.push(frames.last().expect("t >= 2").clone());
    FlowField::new(VideoTensor::new(s, 2, frames.concat())?)
}
