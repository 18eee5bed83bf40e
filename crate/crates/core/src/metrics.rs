//! Evaluation measures: diversity across samples, patch coherence, PSNR.

use crate::error::{Error, Result};
use crate::nnf::{exhaustive_nnf, WeightField};
use crate::patch::{unfold, PatchSpec};
use crate::video::VideoTensor;

/// Luma weights used for every grayscale conversion here.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Grayscale values of an RGB (or already single-channel) tensor.
pub fn grayscale(v: &VideoTensor) -> Result<Vec<f64>> {
    match v.channels() {
        1 => Ok(v.data().iter().map(|&x| x as f64).collect()),
        3 => Ok(v
            .data()
            .chunks_exact(3)
            .map(|p| LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64)
            .collect()),
        c => Err(Error::InvalidShape(format!(
            "grayscale needs 1 or 3 channels, got {c}"
        ))),
    }
}

/// Computed on offsets from the first value, so equal values give exactly 0.
fn population_std(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let Some(x0) = xs.clone().next() else {
        return 0.0;
    };
    let (n, sum) = xs
        .clone()
        .fold((0usize, 0.0), |(n, s), x| (n + 1, s + (x - x0)));
    let mean = sum / n as f64;
    (xs.map(|x| (x - x0 - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Mean over voxels of the per-voxel standard deviation across `samples`
/// (grayscale, population std), divided by the grayscale std of `input`.
pub fn diversity_index(input: &VideoTensor, samples: &[VideoTensor]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::param("samples", "need at least two samples"));
    }
    let first = &samples[0];
    if let Some(s) = samples
        .iter()
        .find(|s| s.shape() != first.shape() || s.channels() != first.channels())
    {
        return Err(Error::ShapeMismatch(format!(
            "samples differ in shape: {} vs {}",
            first.shape(),
            s.shape()
        )));
    }
    let input_std = population_std(grayscale(input)?.into_iter());
    if input_std == 0.0 {
        return Err(Error::param("input", "input video is constant (zero std)"));
    }
    let grays = samples.iter().map(grayscale).collect::<Result<Vec<_>>>()?;
    let n = grays[0].len();
    let total: f64 = (0..n)
        .map(|i| population_std(grays.iter().map(move |g| g[i])))
        .sum();
    Ok(total / n as f64 / input_std)
}

/// Largest, over all patches of `y`, of the smallest MSE to any patch of `x`.
/// Exhaustive; 0 means every patch of `y` occurs in `x`.
pub fn coherence_audit(y: &VideoTensor, x: &VideoTensor, spec: PatchSpec) -> Result<f64> {
    let gy = unfold(y, spec)?;
    let gx = unfold(x, spec)?;
    let field = exhaustive_nnf(&gy, &gx, &WeightField::uniform(gx.len()))?;
    Ok(field
        .distances()
        .iter()
        .fold(0.0f64, |m, &d| m.max(d as f64)))
}

/// PSNR in dB for values in `[-1, 1]` (peak-to-peak range 2). Infinite for
/// identical inputs.
pub fn psnr(a: &VideoTensor, b: &VideoTensor) -> Result<f64> {
    a.check_same_layout(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64;
    Ok(10.0 * (4.0 / mse).log10())
}
