//! Space-time patches: a lazy stride-1 patch grid over a video, and the
//! median fold that turns a set of overlapping patches back into a video.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::video::{Shape3, VideoTensor};

/// Patch extent in frames, rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchSpec {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl PatchSpec {
    pub fn new(t: usize, h: usize, w: usize) -> Result<Self> {
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::param(
                "patch_size",
                format!("{t}x{h}x{w} has a zero extent"),
            ));
        }
        Ok(PatchSpec { t, h, w })
    }

    pub fn as_shape(&self) -> Shape3 {
        Shape3 {
            t: self.t,
            h: self.h,
            w: self.w,
        }
    }

    pub fn voxels(&self) -> usize {
        self.t * self.h * self.w
    }

    pub fn fits(&self, shape: Shape3) -> bool {
        shape.contains(self.as_shape())
    }

    /// Grid of valid patch origins inside `shape`.
    pub fn grid_dims(&self, shape: Shape3) -> Result<Shape3> {
        if !self.fits(shape) {
            return Err(Error::PatchTooLarge {
                patch: self.to_string(),
                tensor: shape.to_string(),
            });
        }
        Ok(Shape3 {
            t: shape.t - self.t + 1,
            h: shape.h - self.h + 1,
            w: shape.w - self.w + 1,
        })
    }
}

impl std::fmt::Display for PatchSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.t, self.h, self.w)
    }
}

impl std::str::FromStr for PatchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let shape: Shape3 = s
            .parse()
            .map_err(|_| Error::param("patch_size", format!("expected TxHxW, got `{s}`")))?;
        PatchSpec::new(shape.t, shape.h, shape.w)
    }
}

/// All stride-1 patches of a video, viewed in place.
///
/// A patch is addressed by the linear index of its origin in the grid
/// (row-major over t, y, x). Its flattened vector is the source sub-block in
/// (t, y, x, c) order; that order is also the storage order, so a patch is
/// `spec.t * spec.h` contiguous rows of `spec.w * channels` values.
#[derive(Debug, Clone)]
pub struct PatchGrid<'a> {
    source: &'a VideoTensor,
    spec: PatchSpec,
    dims: Shape3,
    row_offsets: Vec<usize>,
}

pub fn unfold(v: &VideoTensor, spec: PatchSpec) -> Result<PatchGrid<'_>> {
    let dims = spec.grid_dims(v.shape())?;
    let s = v.shape();
    let c = v.channels();
    let mut row_offsets = Vec::with_capacity(spec.t * spec.h);
    for dt in 0..spec.t {
        for dy in 0..spec.h {
            row_offsets.push(s.index(dt, dy, 0) * c);
        }
    }
    Ok(PatchGrid {
        source: v,
        spec,
        dims,
        row_offsets,
    })
}

impl<'a> PatchGrid<'a> {
    pub fn source(&self) -> &'a VideoTensor {
        self.source
    }

    pub fn spec(&self) -> PatchSpec {
        self.spec
    }

    /// Grid extent `(t - p_t + 1, h - p_h + 1, w - p_w + 1)`.
    pub fn dims(&self) -> Shape3 {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.voxels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.source.channels()
    }

    /// Length of a flattened patch vector.
    pub fn patch_len(&self) -> usize {
        self.spec.voxels() * self.channels()
    }

    pub fn row_len(&self) -> usize {
        self.spec.w * self.channels()
    }

    /// Data offset of the patch origin.
    #[inline]
    pub fn origin(&self, idx: usize) -> usize {
        let (t, y, x) = self.dims.position(idx);
        self.source.offset(t, y, x)
    }

    /// Contiguous rows of patch `idx`, in flattened order.
    #[inline]
    pub fn rows(&self, idx: usize) -> impl Iterator<Item = &'a [f32]> + '_ {
        let base = self.origin(idx);
        let len = self.row_len();
        let data = self.source.data();
        self.row_offsets
            .iter()
            .map(move |&o| &data[base + o..base + o + len])
    }

    pub(crate) fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    /// Materialized patch vector.
    pub fn patch(&self, idx: usize) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.patch_len());
        for row in self.rows(idx) {
            out.extend_from_slice(row);
        }
        out
    }
}

#[inline]
fn median(values: &mut [f32]) -> f32 {
    let n = values.len();
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f32::total_cmp);
    if n % 2 == 1 {
        *upper
    } else {
        let below = lower.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        0.5 * (below + *upper)
    }
}

/// Where each covering patch's suggestion for a voxel comes from.
trait Suggestions: Sync {
    /// Feed `sink` with the channel values suggested for the voxel at offset
    /// `(dt, dy, dx)` inside the patch at grid index `grid_idx`.
    fn visit(&self, grid_idx: usize, d: (usize, usize, usize), sink: &mut dyn FnMut(&[f32]));
}

/// Per-voxel median over all suggestions; errors on any uncovered voxel.
fn fold_with<S: Suggestions>(
    src: &S,
    spec: PatchSpec,
    out_shape: Shape3,
    channels: usize,
) -> Result<VideoTensor> {
    let grid = spec.grid_dims(out_shape)?;
    let row_len = out_shape.w * channels;
    let mut data = vec![0.0f32; out_shape.voxels() * channels];
    let uncovered: Option<(usize, usize, usize)> = data
        .par_chunks_mut(row_len)
        .enumerate()
        .map(|(row, out_row)| {
            let (t, y) = (row / out_shape.h, row % out_shape.h);
            let mut bufs: Vec<Vec<f32>> = vec![Vec::with_capacity(spec.voxels()); channels];
            let mut first_uncovered = None;
            for x in 0..out_shape.w {
                bufs.iter_mut().for_each(Vec::clear);
                for dt in 0..spec.t.min(t + 1) {
                    let gt = t - dt;
                    if gt >= grid.t {
                        continue;
                    }
                    for dy in 0..spec.h.min(y + 1) {
                        let gy = y - dy;
                        if gy >= grid.h {
                            continue;
                        }
                        for dx in 0..spec.w.min(x + 1) {
                            let gx = x - dx;
                            if gx >= grid.w {
                                continue;
                            }
                            src.visit(grid.index(gt, gy, gx), (dt, dy, dx), &mut |vals| {
                                for (b, &v) in bufs.iter_mut().zip(vals) {
                                    b.push(v);
                                }
                            });
                        }
                    }
                }
                if bufs[0].is_empty() {
                    first_uncovered.get_or_insert((t, y, x));
                    continue;
                }
                for (c, b) in bufs.iter_mut().enumerate() {
                    out_row[x * channels + c] = median(b);
                }
            }
            first_uncovered
        })
        .reduce(|| None, |a, b| a.or(b));
    if let Some((t, y, x)) = uncovered {
        return Err(Error::Uncovered { t, y, x });
    }
    Ok(VideoTensor::from_parts(out_shape, channels, data))
}

struct ExplicitPatches<'p> {
    by_position: HashMap<usize, Vec<&'p [f32]>>,
    spec: PatchSpec,
    channels: usize,
}

impl Suggestions for ExplicitPatches<'_> {
    fn visit(
        &self,
        grid_idx: usize,
        (dt, dy, dx): (usize, usize, usize),
        sink: &mut dyn FnMut(&[f32]),
    ) {
        if let Some(list) = self.by_position.get(&grid_idx) {
            let o = ((dt * self.spec.h + dy) * self.spec.w + dx) * self.channels;
            for p in list {
                sink(&p[o..o + self.channels]);
            }
        }
    }
}

/// A flattened patch together with its grid position `(t, y, x)`.
pub type PlacedPatch = ((usize, usize, usize), Vec<f32>);

/// Fold patches given by grid position `(t, y, x)` into a video of shape
/// `out_shape`. Each output value is the median of all patch values that
/// overlap it (mean of the two central values for an even count).
pub fn fold_median(
    patches: &[PlacedPatch],
    spec: PatchSpec,
    out_shape: Shape3,
    channels: usize,
) -> Result<VideoTensor> {
    let grid = spec.grid_dims(out_shape)?;
    if channels == 0 {
        return Err(Error::InvalidShape("zero channels".into()));
    }
    let plen = spec.voxels() * channels;
    let mut by_position: HashMap<usize, Vec<&[f32]>> = HashMap::new();
    for ((t, y, x), p) in patches {
        if *t >= grid.t || *y >= grid.h || *x >= grid.w {
            return Err(Error::param(
                "patches",
                format!("grid position ({t}, {y}, {x}) outside {grid}"),
            ));
        }
        if p.len() != plen {
            return Err(Error::ShapeMismatch(format!(
                "patch has {} values, spec needs {plen}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("patches", "non-finite patch value"));
        }
        by_position
            .entry(grid.index(*t, *y, *x))
            .or_default()
            .push(p);
    }
    let src = ExplicitPatches {
        by_position,
        spec,
        channels,
    };
    fold_with(&src, spec, out_shape, channels)
}

struct Gathered<'a, 'v> {
    values: &'a PatchGrid<'v>,
    matches: &'a [usize],
}

impl Suggestions for Gathered<'_, '_> {
    #[inline]
    fn visit(
        &self,
        grid_idx: usize,
        (dt, dy, dx): (usize, usize, usize),
        sink: &mut dyn FnMut(&[f32]),
    ) {
        let v = self.values.source();
        let (kt, ky, kx) = self.values.dims().position(self.matches[grid_idx]);
        sink(v.voxel(kt + dt, ky + dy, kx + dx));
    }
}

/// Fold where the patch at query grid index `q` is the value patch
/// `matches[q]`, without materializing any patch.
pub(crate) fn fold_gathered(
    values: &PatchGrid<'_>,
    matches: &[usize],
    out_shape: Shape3,
) -> Result<VideoTensor> {
    let spec = values.spec();
    let grid = spec.grid_dims(out_shape)?;
    if matches.len() != grid.voxels() {
        return Err(Error::ShapeMismatch(format!(
            "{} matches for a query grid of {}",
            matches.len(),
            grid
        )));
    }
    fold_with(
        &Gathered { values, matches },
        spec,
        out_shape,
        values.channels(),
    )
}
