//! Dense video tensors and boolean voxel masks.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Spatio-temporal extent of a video: frames, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape3 {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape3 {
    pub fn new(t: usize, h: usize, w: usize) -> Result<Self> {
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidShape(format!(
                "{t}x{h}x{w} has a zero extent"
            )));
        }
        Ok(Shape3 { t, h, w })
    }

    pub fn voxels(&self) -> usize {
        self.t * self.h * self.w
    }

    /// Componentwise `self >= other`.
    pub fn contains(&self, other: Shape3) -> bool {
        self.t >= other.t && self.h >= other.h && self.w >= other.w
    }

    pub fn max(self, other: Shape3) -> Shape3 {
        Shape3 {
            t: self.t.max(other.t),
            h: self.h.max(other.h),
            w: self.w.max(other.w),
        }
    }

    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize) -> usize {
        (t * self.h + y) * self.w + x
    }

    #[inline]
    pub fn position(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.w;
        let rest = idx / self.w;
        (rest / self.h, rest % self.h, x)
    }
}

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.t, self.h, self.w)
    }
}

impl FromStr for Shape3 {
    type Err = Error;

    /// Parses `TxHxW`, e.g. `13x144x256`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let bad = || Error::InvalidShape(format!("expected TxHxW, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut dims = [0usize; 3];
        for (d, p) in dims.iter_mut().zip(&parts) {
            *d = p.trim().parse().map_err(|_| bad())?;
        }
        Shape3::new(dims[0], dims[1], dims[2])
    }
}

/// T×H×W×C video with `f32` samples, channels innermost.
///
/// RGB content lives in `[-1, 1]`. All samples are finite; constructors that
/// take external data check this.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    shape: Shape3,
    channels: usize,
    data: Vec<f32>,
}

impl VideoTensor {
    pub fn new(shape: Shape3, channels: usize, data: Vec<f32>) -> Result<Self> {
        Shape3::new(shape.t, shape.h, shape.w)?;
        if channels == 0 {
            return Err(Error::InvalidShape("zero channels".into()));
        }
        let expected = shape.voxels() * channels;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{shape}x{channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(VideoTensor {
            shape,
            channels,
            data,
        })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(shape: Shape3, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), shape.voxels() * channels);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        VideoTensor {
            shape,
            channels,
            data,
        }
    }

    pub fn filled(shape: Shape3, channels: usize, value: f32) -> Result<Self> {
        VideoTensor::new(shape, channels, vec![value; shape.voxels() * channels])
    }

    pub fn from_fn(
        shape: Shape3,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.voxels() * channels);
        for t in 0..shape.t {
            for y in 0..shape.h {
                for x in 0..shape.w {
                    for c in 0..channels {
                        data.push(f(t, y, x, c));
                    }
                }
            }
        }
        VideoTensor::new(shape, channels, data)
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, t: usize, y: usize, x: usize) -> usize {
        self.shape.index(t, y, x) * self.channels
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.offset(t, y, x) + c]
    }

    /// The channel values of one voxel.
    #[inline]
    pub fn voxel(&self, t: usize, y: usize, x: usize) -> &[f32] {
        let o = self.offset(t, y, x);
        &self.data[o..o + self.channels]
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.shape.h * self.shape.w * self.channels;
        &self.data[t * n..(t + 1) * n]
    }

    /// Per-channel `(min, max)`.
    pub fn channel_range(&self) -> Vec<(f32, f32)> {
        let mut out = vec![(f32::INFINITY, f32::NEG_INFINITY); self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (r, &v) in out.iter_mut().zip(px) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        out
    }

    /// Elementwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        VideoTensor::new(
            self.shape,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise sum of two tensors of identical layout.
    pub fn add(&self, other: &VideoTensor) -> Result<Self> {
        self.check_same_layout(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        VideoTensor::new(self.shape, self.channels, data)
    }

    pub(crate) fn check_same_layout(&self, other: &VideoTensor) -> Result<()> {
        if self.shape != other.shape || self.channels != other.channels {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.shape, self.channels, other.shape, other.channels
            )));
        }
        Ok(())
    }

    /// Stack tensors of equal spatio-temporal shape along the channel axis.
    pub fn concat_channels(parts: &[&VideoTensor]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("channel concatenation"))?;
        let shape = first.shape;
        if let Some(p) = parts.iter().find(|p| p.shape != shape) {
            return Err(Error::ShapeMismatch(format!(
                "cannot concatenate {} with {}",
                shape, p.shape
            )));
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(shape.voxels() * channels);
        for v in 0..shape.voxels() {
            for p in parts {
                data.extend_from_slice(&p.data[v * p.channels..(v + 1) * p.channels]);
            }
        }
        Ok(VideoTensor::from_parts(shape, channels, data))
    }

    /// Keep channels `range`.
    pub fn select_channels(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.channels {
            return Err(Error::param(
                "channels",
                format!("{range:?} out of 0..{}", self.channels),
            ));
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|px| px[range.clone()].iter().copied())
            .collect();
        Ok(VideoTensor::from_parts(self.shape, range.len(), data))
    }
}

/// Boolean T×H×W mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelMask {
    shape: Shape3,
    data: Vec<bool>,
}

impl VoxelMask {
    pub fn new(shape: Shape3, data: Vec<bool>) -> Result<Self> {
        if data.len() != shape.voxels() {
            return Err(Error::ShapeMismatch(format!(
                "mask {shape} needs {} voxels, got {}",
                shape.voxels(),
                data.len()
            )));
        }
        Ok(VoxelMask { shape, data })
    }

    pub fn empty(shape: Shape3) -> Self {
        VoxelMask {
            shape,
            data: vec![false; shape.voxels()],
        }
    }

    pub fn from_fn(shape: Shape3, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(shape.voxels());
        for t in 0..shape.t {
            for y in 0..shape.h {
                for x in 0..shape.w {
                    data.push(f(t, y, x));
                }
            }
        }
        VoxelMask { shape, data }
    }

    /// Voxels whose single channel is above 0.5.
    pub fn from_tensor(v: &VideoTensor) -> Result<Self> {
        if v.channels() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "mask tensor must have 1 channel, got {}",
                v.channels()
            )));
        }
        Ok(VoxelMask {
            shape: v.shape(),
            data: v.data().iter().map(|&m| m > 0.5).collect(),
        })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize) -> bool {
        self.data[self.shape.index(t, y, x)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    pub fn union(&self, other: &VoxelMask) -> Result<VoxelMask> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "mask {} vs {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(VoxelMask {
            shape: self.shape,
            data,
        })
    }

    /// Inclusive-exclusive bounding box `(start, extent)` of set voxels.
    pub fn bounding_box(&self) -> Option<(Shape3Index, Shape3)> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &m) in self.data.iter().enumerate() {
            if m {
                any = true;
                let (t, y, x) = self.shape.position(i);
                for (k, v) in [t, y, x].into_iter().enumerate() {
                    lo[k] = lo[k].min(v);
                    hi[k] = hi[k].max(v);
                }
            }
        }
        any.then(|| {
            (
                (lo[0], lo[1], lo[2]),
                Shape3 {
                    t: hi[0] - lo[0] + 1,
                    h: hi[1] - lo[1] + 1,
                    w: hi[2] - lo[2] + 1,
                },
            )
        })
    }

    pub fn complement(&self) -> VoxelMask {
        VoxelMask {
            shape: self.shape,
            data: self.data.iter().map(|m| !m).collect(),
        }
    }

    /// Set every voxel within Chebyshev distance `r` (along t, y and x) of
    /// a set voxel.
    pub fn dilate(&self, r: usize) -> VoxelMask {
        let s = self.shape;
        let mut data = self.data.clone();
        // One separable pass per axis: (axis length, stride).
        for (n, stride) in [(s.t, s.h * s.w), (s.h, s.w), (s.w, 1)] {
            let src = data.clone();
            for (i, d) in data.iter_mut().enumerate() {
                if *d {
                    continue;
                }
                let pos = (i / stride) % n;
                let lo = pos.saturating_sub(r);
                let hi = (pos + r).min(n - 1);
                let base = i - pos * stride;
                *d = (lo..=hi).any(|p| src[base + p * stride]);
            }
        }
        VoxelMask { shape: s, data }
    }

    /// `true` at patch grid position `j` when the `spec`-sized block starting
    /// there contains no set voxel. Empty if the block does not fit.
    pub fn clear_blocks(&self, block: Shape3) -> Vec<bool> {
        let s = self.shape;
        if !s.contains(block) {
            return Vec::new();
        }
        let g = Shape3 {
            t: s.t - block.t + 1,
            h: s.h - block.h + 1,
            w: s.w - block.w + 1,
        };
        // Sliding "any" along w, then h, then t; each pass shrinks one axis.
        let window_any = |src: &[bool], outer: usize, n: usize, inner: usize, len: usize| {
            let m = n - len + 1;
            let mut out = vec![false; outer * m * inner];
            for o in 0..outer {
                for p in 0..m {
                    for i in 0..inner {
                        out[(o * m + p) * inner + i] =
                            (p..p + len).any(|q| src[(o * n + q) * inner + i]);
                    }
                }
            }
            out
        };
        let a = window_any(&self.data, s.t * s.h, s.w, 1, block.w);
        let b = window_any(&a, s.t, s.h, g.w, block.h);
        let hit = window_any(&b, 1, s.t, g.h * g.w, block.t);
        hit.into_iter().map(|h| !h).collect()
    }

    /// Nearest-neighbor resampling to `target`.
    pub fn resize_nearest(&self, target: Shape3) -> VoxelMask {
        let map = |o: usize, n_out: usize, n_in: usize| {
            (((o as f64 + 0.5) * n_in as f64 / n_out as f64) as usize).min(n_in - 1)
        };
        let s = self.shape;
        VoxelMask::from_fn(target, |t, y, x| {
            self.get(
                map(t, target.t, s.t),
                map(y, target.h, s.h),
                map(x, target.w, s.w),
            )
        })
    }
}

pub type Shape3Index = (usize, usize, usize);

/// Gaussian noise drawn once per spatial position and copied to every frame.
///
/// The H×W×C slab comes from ChaCha8 stream 0 under `seed` (see [`crate::rng`]).
pub fn make_replicated_noise(
    shape: Shape3,
    channels: usize,
    std: f32,
    seed: u64,
) -> Result<VideoTensor> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::param(
            "noise_std",
            format!("must be >= 0, got {std}"),
        ));
    }
    Shape3::new(shape.t, shape.h, shape.w)?;
    if channels == 0 {
        return Err(Error::InvalidShape("zero channels".into()));
    }
    let slab_len = shape.h * shape.w * channels;
    let slab: Vec<f32> = if std == 0.0 {
        vec![0.0; slab_len]
    } else {
        let normal =
            Normal::new(0.0f32, std).map_err(|e| Error::param("noise_std", e.to_string()))?;
        let mut rng = rng::stream(seed, 0);
        (0..slab_len).map(|_| normal.sample(&mut rng)).collect()
    };
    let mut data = Vec::with_capacity(slab_len * shape.t);
    for _ in 0..shape.t {
        data.extend_from_slice(&slab);
    }
    VideoTensor::new(shape, channels, data)
}
