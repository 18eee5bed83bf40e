use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::pyramid::{build_pyramid, companion_shapes};
use crate::resize::resize_tricubic;
use crate::rng::derive_seed;
use crate::video::{make_replicated_noise, Shape3, VideoTensor};
use crate::vpnn::run_scale;

/// Output level shapes for generating from an input pyramid with level
/// shapes `input`.
pub fn generation_shapes(input: &[Shape3], cfg: &PipelineConfig) -> Result<Vec<Shape3>> {
    let top = match cfg.out_shape {
        Some(s) => s,
        None => {
            let t = (input[0].t as f64 * cfg.temporal_shrink).round() as usize;
            Shape3 { t, ..input[0] }
        }
    };
    let floor = cfg.patch_floor();
    if !top.contains(floor) {
        return Err(Error::InvalidShape(format!(
            "output shape {top} is smaller than the patch size {floor}"
        )));
    }
    Ok(companion_shapes(input, top, floor))
}

/// Sample a new video with the patch statistics of `x`.
///
/// The coarsest guess is the coarsest input level resized to the coarsest
/// output shape plus Gaussian noise that is identical in every frame.
pub fn generate(x: &VideoTensor, cfg: &PipelineConfig, seed: u64) -> Result<VideoTensor> {
    cfg.validate()?;
    let pyr = build_pyramid(x, cfg.factors, cfg.min_t, cfg.min_s)?;
    let shapes = generation_shapes(&pyr.shapes(), cfg)?;
    let top = pyr.coarsest();
    log::debug!("generate: {} levels, output {}", top + 1, shapes[0]);

    let x_top = pyr.level(top);
    let noise = |shape: Shape3, tag: u64| {
        make_replicated_noise(
            shape,
            x.channels(),
            cfg.noise_std,
            derive_seed(seed, &[0, tag]),
        )
    };
    let guess = resize_tricubic(x_top, shapes[top])?.add(&noise(shapes[top], 0)?)?;
    let keys = if cfg.noisy_keys {
        x_top.add(&noise(x_top.shape(), 1)?)?
    } else {
        x_top.clone()
    };
    let mut y = run_scale(
        x_top,
        &guess,
        &keys,
        &cfg.vpnn(top, shapes[top], None, seed),
    )?;

    for n in (0..top).rev() {
        let x_n = pyr.level(n);
        let guess = resize_tricubic(&y, shapes[n])?;
        let keys = resize_tricubic(pyr.level(n + 1), x_n.shape())?;
        y = run_scale(x_n, &guess, &keys, &cfg.vpnn(n, shapes[n], None, seed))?;
        log::debug!("generate: level {n} done ({})", shapes[n]);
    }
    Ok(y)
}
