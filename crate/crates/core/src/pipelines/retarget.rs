use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::pyramid::{build_pyramid, cascade, companion_shapes};
use crate::resize::resize_tricubic;
use crate::video::{Shape3, VideoTensor};
use crate::vpnn::run_scale;

/// Resize `x` to `target` (space, time or both) by resynthesizing it from
/// its own patches.
///
/// The coarsest guess is the coarsest level of a pyramid of the plainly
/// resized video, with the same depth and per-level ratios as the input
/// pyramid. No noise is added.
pub fn retarget(x: &VideoTensor, target: Shape3, cfg: &PipelineConfig) -> Result<VideoTensor> {
    cfg.validate()?;
    if target.t < cfg.min_t || target.h.min(target.w) < cfg.min_s {
        return Err(Error::InvalidShape(format!(
            "target {target} is below the pyramid minimum ({} frames, {} px)",
            cfg.min_t, cfg.min_s
        )));
    }
    let pyr = build_pyramid(x, cfg.factors, cfg.min_t, cfg.min_s)?;
    let shapes = companion_shapes(&pyr.shapes(), target, cfg.patch_floor());
    let top = pyr.coarsest();
    let resized = resize_tricubic(x, target)?;
    let guess = cascade(&resized, &shapes)?.pop().expect("non-empty");

    let x_top = pyr.level(top);
    let mut y = run_scale(
        x_top,
        &guess,
        x_top,
        &cfg.vpnn(top, shapes[top], cfg.alpha, cfg.seed),
    )?;
    for n in (0..top).rev() {
        let x_n = pyr.level(n);
        let guess = resize_tricubic(&y, shapes[n])?;
        let keys = resize_tricubic(pyr.level(n + 1), x_n.shape())?;
        y = run_scale(
            x_n,
            &guess,
            &keys,
            &cfg.vpnn(n, shapes[n], cfg.alpha, cfg.seed),
        )?;
    }
    Ok(y)
}
