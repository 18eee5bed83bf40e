//! One pyramid scale of patch nearest-neighbor synthesis.
//!
//! A step unfolds a query tensor `Q` and a key tensor `K`, matches every
//! query patch to a key patch, copies the value patch from `V` at the matched
//! key position and folds the copies back with a per-voxel median. `K` and
//! `V` share their spatio-temporal shape; `Q` and `K` share their channel
//! layout, which may include auxiliary channels that `V` does not have.
//!
//! With `alpha` set, keys are reweighted by rareness: a reverse pass finds,
//! for every key, its closest query, and the key gets weight
//! `1 / (alpha + distance)`. Keys that no query resembles become cheap, so
//! the output tends to use more of the input.

use crate::error::{Error, Result};
use crate::nnf::{MatchProblem, NNField, PatchMatchParams, Solver, WeightField};
use crate::patch::{fold_gathered, unfold, PatchGrid, PatchSpec};
use crate::rng::derive_seed;
use crate::video::{VideoTensor, VoxelMask};

/// Solver choice plus its schedule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Search {
    pub solver: Solver,
    pub patchmatch: PatchMatchParams,
}

impl Search {
    pub fn exhaustive() -> Self {
        Search {
            solver: Solver::Exhaustive,
            ..Search::default()
        }
    }

    pub fn solve(&self, problem: &MatchProblem<'_, '_>, seed: u64) -> Result<NNField> {
        match self.solver {
            Solver::Exhaustive => Ok(problem.exhaustive()),
            Solver::PatchMatch => problem.patchmatch(seed, &self.patchmatch),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpnnConfig {
    pub spec: PatchSpec,
    pub em_iters: usize,
    /// Rareness offset; `None` means uniform key weights.
    pub alpha: Option<f32>,
    pub search: Search,
    pub seed: u64,
}

impl VpnnConfig {
    pub fn new(spec: PatchSpec) -> Self {
        VpnnConfig {
            spec,
            em_iters: 1,
            alpha: None,
            search: Search::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.em_iters == 0 {
            return Err(Error::param("em_iters", "must be at least 1"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param("alpha", format!("must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// Per-key weights `1 / (alpha + d_j)`, where `d_j` is the distance from key
/// `j` to its nearest query (found by matching keys against queries with
/// uniform weights).
pub fn key_rareness(
    q: &PatchGrid<'_>,
    k: &PatchGrid<'_>,
    alpha: f32,
    seed: u64,
    search: &Search,
) -> Result<WeightField> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("must be positive, got {alpha}"),
        ));
    }
    let uniform = WeightField::uniform(q.len());
    let reverse = search.solve(&MatchProblem::new(k, q, &uniform)?, seed)?;
    WeightField::new(
        reverse
            .distances()
            .iter()
            .map(|d| 1.0 / (alpha + d))
            .collect(),
    )
}

/// Match `q` against `k` and fold the matched patches of `v` into a tensor of
/// `q`'s spatio-temporal shape with `v`'s channels.
pub fn vpnn_step(
    q: &VideoTensor,
    k: &VideoTensor,
    v: &VideoTensor,
    cfg: &VpnnConfig,
) -> Result<VideoTensor> {
    cfg.validate()?;
    step(q, k, v, cfg, None, cfg.seed)
}

/// [`vpnn_step`] restricted to keys `j` with `allowed[j]` (key grid order).
pub fn vpnn_step_restricted(
    q: &VideoTensor,
    k: &VideoTensor,
    v: &VideoTensor,
    cfg: &VpnnConfig,
    allowed: &[bool],
) -> Result<VideoTensor> {
    cfg.validate()?;
    step(q, k, v, cfg, Some(allowed), cfg.seed)
}

fn step(
    q: &VideoTensor,
    k: &VideoTensor,
    v: &VideoTensor,
    cfg: &VpnnConfig,
    allowed: Option<&[bool]>,
    seed: u64,
) -> Result<VideoTensor> {
    if k.shape() != v.shape() {
        return Err(Error::ShapeMismatch(format!(
            "keys are {} but values are {}",
            k.shape(),
            v.shape()
        )));
    }
    let gq = unfold(q, cfg.spec)?;
    let gk = unfold(k, cfg.spec)?;
    let gv = unfold(v, cfg.spec)?;
    let weights = match cfg.alpha {
        Some(alpha) => key_rareness(&gq, &gk, alpha, derive_seed(seed, &[0]), &cfg.search)?,
        None => WeightField::uniform(gk.len()),
    };
    let mut problem = MatchProblem::new(&gq, &gk, &weights)?;
    if let Some(a) = allowed {
        problem = problem.with_allowed(a)?;
    }
    let field = cfg.search.solve(&problem, derive_seed(seed, &[1]))?;
    fold_gathered(&gv, field.matches(), q.shape())
}

/// Everything one scale needs.
///
/// The first EM iteration matches `first_query` against `first_keys`. Later
/// iterations match `query_aux ∥ previous output` against `key_aux ∥ value`
/// (aux channels first, when present). Values always come from `value`.
#[derive(Debug, Clone, Copy)]
pub struct ScaleInputs<'a> {
    pub first_query: &'a VideoTensor,
    pub first_keys: &'a VideoTensor,
    pub value: &'a VideoTensor,
    pub query_aux: Option<&'a VideoTensor>,
    pub key_aux: Option<&'a VideoTensor>,
    /// Key grid positions that may be matched; all if `None`.
    pub allowed: Option<&'a [bool]>,
    /// Voxels set in the mask are copied from the tensor after every iteration.
    pub fixed: Option<(&'a VoxelMask, &'a VideoTensor)>,
}

impl<'a> ScaleInputs<'a> {
    pub fn new(
        first_query: &'a VideoTensor,
        first_keys: &'a VideoTensor,
        value: &'a VideoTensor,
    ) -> Self {
        ScaleInputs {
            first_query,
            first_keys,
            value,
            query_aux: None,
            key_aux: None,
            allowed: None,
            fixed: None,
        }
    }
}

/// Run `cfg.em_iters` steps at one scale: first with `(guess, k_first, x_n)`,
/// then with `(previous output, x_n, x_n)`.
pub fn run_scale(
    x_n: &VideoTensor,
    guess: &VideoTensor,
    k_first: &VideoTensor,
    cfg: &VpnnConfig,
) -> Result<VideoTensor> {
    run_scale_with(&ScaleInputs::new(guess, k_first, x_n), cfg)
}

pub fn run_scale_with(inputs: &ScaleInputs<'_>, cfg: &VpnnConfig) -> Result<VideoTensor> {
    cfg.validate()?;
    if inputs.first_keys.shape() != inputs.value.shape() {
        return Err(Error::ShapeMismatch(format!(
            "first keys are {} but values are {}",
            inputs.first_keys.shape(),
            inputs.value.shape()
        )));
    }
    let later_keys = match inputs.key_aux {
        Some(aux) => VideoTensor::concat_channels(&[aux, inputs.value])?,
        None => inputs.value.clone(),
    };
    let mut out: Option<VideoTensor> = None;
    for it in 0..cfg.em_iters {
        let seed = derive_seed(cfg.seed, &[it as u64]);
        let next = match &out {
            None => step(
                inputs.first_query,
                inputs.first_keys,
                inputs.value,
                cfg,
                inputs.allowed,
                seed,
            )?,
            Some(prev) => {
                let query = match inputs.query_aux {
                    Some(aux) => VideoTensor::concat_channels(&[aux, prev])?,
                    None => prev.clone(),
                };
                step(&query, &later_keys, inputs.value, cfg, inputs.allowed, seed)?
            }
        };
        out = Some(match inputs.fixed {
            Some((mask, source)) => overwrite(&next, mask, source)?,
            None => next,
        });
    }
    Ok(out.expect("em_iters >= 1"))
}

/// Copy of `v` with the voxels set in `mask` taken from `source`.
pub fn overwrite(v: &VideoTensor, mask: &VoxelMask, source: &VideoTensor) -> Result<VideoTensor> {
    v.check_same_layout(source)?;
    if mask.shape() != v.shape() {
        return Err(Error::ShapeMismatch(format!(
            "mask is {} but video is {}",
            mask.shape(),
            v.shape()
        )));
    }
    let c = v.channels();
    let mut data = v.data().to_vec();
    for (i, _) in mask.data().iter().enumerate().filter(|(_, m)| **m) {
        data[i * c..(i + 1) * c].copy_from_slice(&source.data()[i * c..(i + 1) * c]);
    }
    VideoTensor::new(v.shape(), c, data)
}
