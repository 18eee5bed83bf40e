//! Coarse-to-fine drivers built on [`crate::vpnn`].
//!
//! Every pipeline builds a pyramid of its source video, synthesizes the
//! coarsest level first and then walks towards the finest level, using the
//! upscaled output of the previous level as the next initial guess. Value
//! patches always come from un-degraded pyramid levels of the source.

mod analogy;
mod generate;
mod inpaint;
mod retarget;

pub use analogy::analogies;
pub use generate::{generate, generation_shapes};
pub use inpaint::{inpaint, inpaint_depth, CueMask};
pub use retarget::retarget;

use crate::error::{Error, Result};
use crate::patch::PatchSpec;
use crate::pyramid::ScaleFactors;
use crate::rng::derive_seed;
use crate::video::Shape3;
use crate::vpnn::{Search, VpnnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub factors: ScaleFactors,
    pub min_t: usize,
    pub min_s: usize,
    /// Standard deviation of the coarsest-level noise (generation only).
    pub noise_std: f32,
    /// Output shape for generation; defaults to the input with its frame
    /// count scaled by `temporal_shrink`.
    pub out_shape: Option<Shape3>,
    pub spec_small: PatchSpec,
    pub spec_large: PatchSpec,
    pub em_iters_small: usize,
    pub em_iters_large: usize,
    /// Levels whose output has more voxels than this use `spec_small` and
    /// `em_iters_small`.
    pub voxel_threshold: usize,
    /// The finest this many levels run a single EM iteration.
    pub fine_levels_single_em: usize,
    /// Rareness offset for retargeting, inpainting and analogies. Generation
    /// always matches with uniform weights.
    pub alpha: Option<f32>,
    pub temporal_shrink: f64,
    /// Analogies use auxiliary channels on the coarsest
    /// `floor(fraction * N)` + 1 levels only.
    pub aux_max_scale_fraction: f64,
    /// Generation: add the coarsest noise to the keys as well.
    pub noisy_keys: bool,
    pub search: Search,
    /// Seed for pipelines that take no explicit seed.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::generation()
    }
}

impl PipelineConfig {
    /// Defaults for generation and retargeting.
    pub fn generation() -> Self {
        PipelineConfig {
            factors: ScaleFactors::new(0.82, 0.87).expect("valid factors"),
            min_t: 3,
            min_s: 15,
            noise_std: 3.0,
            out_shape: None,
            spec_small: PatchSpec::new(3, 5, 5).expect("valid spec"),
            spec_large: PatchSpec::new(3, 7, 7).expect("valid spec"),
            em_iters_small: 1,
            em_iters_large: 5,
            voxel_threshold: 3_000_000,
            fine_levels_single_em: 0,
            alpha: Some(1.0),
            temporal_shrink: 0.9,
            aux_max_scale_fraction: 0.5,
            noisy_keys: false,
            search: Search::default(),
            seed: 0,
        }
    }

    /// Analogies between arbitrary video pairs.
    pub fn analogies_all_pairs() -> Self {
        let spec = PatchSpec::new(3, 5, 5).expect("valid spec");
        PipelineConfig {
            factors: ScaleFactors::uniform(0.9).expect("valid factors"),
            min_t: 3,
            min_s: 20,
            spec_small: spec,
            spec_large: spec,
            em_iters_small: 1,
            em_iters_large: 1,
            alpha: Some(1.0),
            ..PipelineConfig::generation()
        }
    }

    /// Analogies driven by a sketch-like content video.
    pub fn analogies_sketch() -> Self {
        PipelineConfig {
            factors: ScaleFactors::uniform(0.78).expect("valid factors"),
            min_t: 5,
            min_s: 35,
            em_iters_large: 3,
            fine_levels_single_em: 2,
            ..PipelineConfig::analogies_all_pairs()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_t == 0 || self.min_s == 0 {
            return Err(Error::param("min_size", "pyramid minima must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param(
                "noise_std",
                format!("must be >= 0, got {}", self.noise_std),
            ));
        }
        if self.voxel_threshold == 0 {
            return Err(Error::param("voxel_threshold", "must be positive"));
        }
        if self.em_iters_small == 0 || self.em_iters_large == 0 {
            return Err(Error::param("em_iters", "must be at least 1"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param("alpha", format!("must be positive, got {a}")));
            }
        }
        if !(self.temporal_shrink > 0.0 && self.temporal_shrink <= 1.0) {
            return Err(Error::param(
                "temporal_shrink",
                format!("must lie in (0, 1], got {}", self.temporal_shrink),
            ));
        }
        if !(self.aux_max_scale_fraction > 0.0 && self.aux_max_scale_fraction <= 1.0) {
            return Err(Error::param(
                "aux_max_scale_fraction",
                format!("must lie in (0, 1], got {}", self.aux_max_scale_fraction),
            ));
        }
        for spec in [self.spec_small, self.spec_large] {
            if spec.t > self.min_t || spec.h > self.min_s || spec.w > self.min_s {
                return Err(Error::param(
                    "patch_size",
                    format!(
                        "patch {spec} does not fit the coarsest level ({} frames, {} px)",
                        self.min_t, self.min_s
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Patch size and EM count for level `n` whose output has shape `out`.
    pub fn level_params(&self, n: usize, out: Shape3) -> (PatchSpec, usize) {
        let (spec, em) = if out.voxels() > self.voxel_threshold {
            (self.spec_small, self.em_iters_small)
        } else {
            (self.spec_large, self.em_iters_large)
        };
        (
            spec,
            if n < self.fine_levels_single_em {
                1
            } else {
                em
            },
        )
    }

    /// Smallest shape every patch size fits into.
    fn patch_floor(&self) -> Shape3 {
        self.spec_small.as_shape().max(self.spec_large.as_shape())
    }

    fn vpnn(&self, n: usize, out: Shape3, alpha: Option<f32>, seed: u64) -> VpnnConfig {
        let (spec, em_iters) = self.level_params(n, out);
        VpnnConfig {
            spec,
            em_iters,
            alpha,
            search: self.search.clone(),
            seed: derive_seed(seed, &[1, n as u64]),
        }
    }
}
