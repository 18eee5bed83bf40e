use super::PipelineConfig;
use crate::error::{Error, Result};
use crate::pyramid::{build_pyramid, cascade, companion_shapes};
use crate::resize::resize_tricubic;
use crate::video::VideoTensor;
use crate::vpnn::{run_scale_with, ScaleInputs};

fn check_dyn(video: &VideoTensor, dynamic: &VideoTensor, name: &'static str) -> Result<()> {
    if dynamic.shape() != video.shape() || dynamic.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "{name} must be a one-channel field of shape {}, got {}x{}",
            video.shape(),
            dynamic.shape(),
            dynamic.channels()
        )));
    }
    Ok(())
}

/// Render the motion layout of content `c` with the appearance of style `s`.
///
/// `dyn_c` and `dyn_s` are one-channel dynamic structure fields of `c` and
/// `s`. The coarsest level matches on dynamic structure alone. The coarser
/// levels, up to `aux_max_scale_fraction` of the pyramid height, match the
/// dynamic structure concatenated with color; finer levels match color
/// only, like generation. The output has `c`'s shape.
pub fn analogies(
    c: &VideoTensor,
    s: &VideoTensor,
    dyn_c: &VideoTensor,
    dyn_s: &VideoTensor,
    cfg: &PipelineConfig,
) -> Result<VideoTensor> {
    cfg.validate()?;
    check_dyn(c, dyn_c, "content dynamics")?;
    check_dyn(s, dyn_s, "style dynamics")?;
    let pyr = build_pyramid(s, cfg.factors, cfg.min_t, cfg.min_s)?;
    let s_shapes = pyr.shapes();
    let c_shapes = companion_shapes(&s_shapes, c.shape(), cfg.patch_floor());
    let dc = cascade(dyn_c, &c_shapes)?;
    let ds = cascade(dyn_s, &s_shapes)?;
    let top = pyr.coarsest();
    let first_aux = top - (cfg.aux_max_scale_fraction * top as f64).floor() as usize;
    log::debug!(
        "analogies: {} levels, auxiliary channels on levels {first_aux}..={top}",
        top + 1
    );

    let s_top = pyr.level(top);
    let coarsest = ScaleInputs {
        query_aux: Some(&dc[top]),
        key_aux: Some(&ds[top]),
        ..ScaleInputs::new(&dc[top], &ds[top], s_top)
    };
    let mut y = run_scale_with(
        &coarsest,
        &cfg.vpnn(top, c_shapes[top], cfg.alpha, cfg.seed),
    )?;

    for n in (0..top).rev() {
        let s_n = pyr.level(n);
        let up = resize_tricubic(&y, c_shapes[n])?;
        let vcfg = cfg.vpnn(n, c_shapes[n], cfg.alpha, cfg.seed);
        y = if n >= first_aux {
            let query = VideoTensor::concat_channels(&[&dc[n], &up])?;
            let keys = VideoTensor::concat_channels(&[&ds[n], s_n])?;
            let inputs = ScaleInputs {
                query_aux: Some(&dc[n]),
                key_aux: Some(&ds[n]),
                ..ScaleInputs::new(&query, &keys, s_n)
            };
            run_scale_with(&inputs, &vcfg)?
        } else {
            let keys = resize_tricubic(pyr.level(n + 1), s_n.shape())?;
            run_scale_with(&ScaleInputs::new(&up, &keys, s_n), &vcfg)?
        };
    }
    Ok(y)
}
