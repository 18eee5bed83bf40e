//! Spatio-temporal pyramids.
//!
//! Level shapes follow a stopping rule: every step multiplies each extent by
//! its factor (rounded half away from zero) and clamps it at its minimum.
//! Once the spatial group has reached its minimum (the smaller of height and
//! width equals `min_s`) it is held fixed while the temporal extent keeps
//! shrinking, and vice versa. Neither height nor width is ever smaller than
//! `min_s`. Building stops when both groups sit at their minima.

use crate::error::{Error, Result};
use crate::resize::resize_tricubic;
use crate::video::{Shape3, VideoTensor};

/// Per-level downscaling factors; height and width always share one factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFactors {
    spatial: f64,
    temporal: f64,
}

impl ScaleFactors {
    pub fn new(spatial: f64, temporal: f64) -> Result<Self> {
        for (name, r) in [("spatial factor", spatial), ("temporal factor", temporal)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::param(
                    if name.starts_with('s') {
                        "factor_spatial"
                    } else {
                        "factor_temporal"
                    },
                    format!("{name} must lie in (0, 1), got {r}"),
                ));
            }
        }
        Ok(ScaleFactors { spatial, temporal })
    }

    pub fn uniform(r: f64) -> Result<Self> {
        ScaleFactors::new(r, r)
    }

    pub fn spatial(&self) -> f64 {
        self.spatial
    }

    pub fn temporal(&self) -> f64 {
        self.temporal
    }
}

/// One shrink step. Always makes progress while above the minimum: if
/// rounding would keep the extent unchanged it drops by one.
fn shrink(d: usize, r: f64, min: usize) -> usize {
    if d <= min {
        return d;
    }
    let next = (d as f64 * r).round() as usize;
    next.min(d - 1).max(min)
}

/// Level shapes from finest (`shape`) to coarsest.
pub fn pyramid_shapes(
    shape: Shape3,
    factors: ScaleFactors,
    min_t: usize,
    min_s: usize,
) -> Result<Vec<Shape3>> {
    if min_t == 0 || min_s == 0 {
        return Err(Error::param("min_size", "pyramid minima must be positive"));
    }
    if shape.t < min_t || shape.h.min(shape.w) < min_s {
        return Err(Error::InvalidShape(format!(
            "{shape} is below the pyramid minimum ({min_t} frames, {min_s} px)"
        )));
    }
    let mut shapes = vec![shape];
    let mut cur = shape;
    loop {
        let temporal_done = cur.t <= min_t;
        let spatial_done = cur.h.min(cur.w) <= min_s;
        if temporal_done && spatial_done {
            break;
        }
        let mut next = cur;
        if !temporal_done {
            next.t = shrink(cur.t, factors.temporal, min_t);
        }
        if !spatial_done {
            next.h = shrink(cur.h, factors.spatial, min_s);
            next.w = shrink(cur.w, factors.spatial, min_s);
        }
        shapes.push(next);
        cur = next;
    }
    Ok(shapes)
}

/// Shapes of a companion pyramid for a video of shape `top` that mirrors the
/// per-level ratios of `reference`, never going below `floor`.
pub fn companion_shapes(reference: &[Shape3], top: Shape3, floor: Shape3) -> Vec<Shape3> {
    let base = reference[0];
    let scale = |n: usize, base_n: usize, top_n: usize, floor_n: usize| {
        if n == base_n {
            top_n
        } else {
            ((top_n as f64 * n as f64 / base_n as f64).round() as usize)
                .max(floor_n)
                .min(top_n)
        }
    };
    reference
        .iter()
        .map(|s| Shape3 {
            t: scale(s.t, base.t, top.t, floor.t),
            h: scale(s.h, base.h, top.h, floor.h),
            w: scale(s.w, base.w, top.w, floor.w),
        })
        .collect()
}

/// Resize `v` successively through `shapes` (`shapes[0]` must be `v`'s shape);
/// each level is produced from the previous one.
pub fn cascade(v: &VideoTensor, shapes: &[Shape3]) -> Result<Vec<VideoTensor>> {
    if shapes.first() != Some(&v.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "first level must be {}, got {:?}",
            v.shape(),
            shapes.first()
        )));
    }
    let mut levels = vec![v.clone()];
    for &s in &shapes[1..] {
        let next = resize_tricubic(levels.last().expect("non-empty"), s)?;
        levels.push(next);
    }
    Ok(levels)
}

/// Levels `x_0 ..= x_N`; index 0 is the input, the last is the coarsest.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<VideoTensor>,
    factors: ScaleFactors,
    min_t: usize,
    min_s: usize,
}

impl Pyramid {
    pub fn levels(&self) -> &[VideoTensor] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &VideoTensor {
        &self.levels[n]
    }

    /// Index of the coarsest level (N).
    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn shapes(&self) -> Vec<Shape3> {
        self.levels.iter().map(|l| l.shape()).collect()
    }

    pub fn factors(&self) -> ScaleFactors {
        self.factors
    }

    pub fn minima(&self) -> (usize, usize) {
        (self.min_t, self.min_s)
    }
}

pub fn build_pyramid(
    v: &VideoTensor,
    factors: ScaleFactors,
    min_t: usize,
    min_s: usize,
) -> Result<Pyramid> {
    let shapes = pyramid_shapes(v.shape(), factors, min_t, min_s)?;
    Ok(Pyramid {
        levels: cascade(v, &shapes)?,
        factors,
        min_t,
        min_s,
    })
}
