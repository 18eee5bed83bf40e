use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::pyramid::{cascade, pyramid_shapes};
use crate::resize::resize_tricubic;
use crate::video::{Shape3, VideoTensor, VoxelMask};
use crate::vpnn::{overwrite, run_scale_with, ScaleInputs};

/// Occluded voxels and the rough colors a user painted into them.
#[derive(Debug, Clone, PartialEq)]
pub struct CueMask {
    mask: VoxelMask,
    cue: VideoTensor,
}

impl CueMask {
    /// `cue` must have the mask's shape; only its values on masked voxels
    /// are used, and those must lie in `[-1, 1]`.
    pub fn new(mask: VoxelMask, cue: VideoTensor) -> Result<Self> {
        if mask.shape() != cue.shape() {
            return Err(Error::ShapeMismatch(format!(
                "mask is {} but cue is {}",
                mask.shape(),
                cue.shape()
            )));
        }
        if mask.count() == 0 {
            return Err(Error::Empty("inpainting mask"));
        }
        let c = cue.channels();
        for (i, _) in mask.data().iter().enumerate().filter(|(_, m)| **m) {
            if let Some(v) = cue.data()[i * c..(i + 1) * c]
                .iter()
                .find(|v| v.abs() > 1.0)
            {
                return Err(Error::param(
                    "cue",
                    format!("cue value {v} outside [-1, 1]"),
                ));
            }
        }
        Ok(CueMask { mask, cue })
    }

    pub fn mask(&self) -> &VoxelMask {
        &self.mask
    }

    pub fn cue(&self) -> &VideoTensor {
        &self.cue
    }
}

/// Level shapes for inpainting: the pyramid rule, continued below the
/// configured minima (down to the patch size) if needed, and cut at the
/// first level where the nearest-downscaled mask fits inside one patch.
pub fn inpaint_depth(shape: Shape3, mask: &VoxelMask, cfg: &PipelineConfig) -> Result<Vec<Shape3>> {
    let floor = cfg.patch_floor();
    let min_s = cfg.min_s.min(floor.h.max(floor.w));
    let mut shapes = pyramid_shapes(shape, cfg.factors, cfg.min_t.min(floor.t), min_s)?;
    let fits = |n: usize, s: Shape3| {
        let (spec, _) = cfg.level_params(n, s);
        match mask.resize_nearest(s).bounding_box() {
            Some((_, bbox)) => spec.as_shape().contains(bbox),
            None => true,
        }
    };
    if let Some(n) = shapes.iter().enumerate().position(|(n, &s)| fits(n, s)) {
        shapes.truncate(n + 1);
    }
    Ok(shapes)
}

/// Fill the masked region of `x`, steered by the cue colors.
///
/// Every level is built from `x` with the cue pasted into the mask. Key and
/// value patches are restricted to patches that avoid the mask (downscaled
/// to the level and grown by one voxel); voxels outside the mask are reset
/// to the known content after every step, and the finest output keeps every
/// unmasked voxel of `x` exactly.
pub fn inpaint(x: &VideoTensor, cue: &CueMask, cfg: &PipelineConfig) -> Result<VideoTensor> {
    cfg.validate()?;
    let mask = cue.mask();
    if mask.shape() != x.shape() || cue.cue().channels() != x.channels() {
        return Err(Error::ShapeMismatch(format!(
            "video is {}x{}, cue is {}x{}",
            x.shape(),
            x.channels(),
            mask.shape(),
            cue.cue().channels()
        )));
    }
    if mask.count() == mask.shape().voxels() {
        return Err(Error::param("mask", "mask covers the entire video"));
    }
    let filled = overwrite(x, mask, cue.cue())?;
    let shapes = inpaint_depth(x.shape(), mask, cfg)?;
    let levels = cascade(&filled, &shapes)?;
    let top = shapes.len() - 1;
    log::debug!("inpaint: {} levels, coarsest {}", top + 1, shapes[top]);

    let mut y: Option<VideoTensor> = None;
    for n in (0..=top).rev() {
        let x_n = &levels[n];
        let level_mask = mask.resize_nearest(shapes[n]);
        let known = level_mask.complement();
        let vcfg = cfg.vpnn(n, shapes[n], cfg.alpha, cfg.seed);
        let allowed = level_mask.dilate(1).clear_blocks(vcfg.spec.as_shape());
        if !allowed.iter().any(|&a| a) {
            return Err(Error::param(
                "mask",
                format!("no patch at level {n} ({}) avoids the mask", shapes[n]),
            ));
        }
        let (guess, keys) = match &y {
            None => (x_n.clone(), x_n.clone()),
            Some(prev) => (
                resize_tricubic(prev, shapes[n])?,
                resize_tricubic(&levels[n + 1], shapes[n])?,
            ),
        };
        let inputs = ScaleInputs {
            allowed: Some(&allowed),
            fixed: Some((&known, x_n)),
            ..ScaleInputs::new(&guess, &keys, x_n)
        };
        y = Some(run_scale_with(&inputs, &vcfg)?);
    }
    overwrite(&y.expect("at least one level"), &mask.complement(), x)
}
