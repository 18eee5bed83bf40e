//! Weighted nearest-neighbor fields between two patch grids.
//!
//! For every query patch `p` we look for the key patch `j` minimizing
//! `W(j) * D(Q(p), K(j))`, where `D` is the patch MSE and `W` a positive
//! per-key weight. [`MatchProblem::exhaustive`] scans every key;
//! [`MatchProblem::patchmatch`] is the randomized solver.
//!
//! # PatchMatch schedule
//!
//! Matches start uniformly at random. Each iteration then visits every query
//! and tries, in order:
//!
//! 1. propagation from the six neighbors at distance `step` along t, y and x:
//!    the neighbor's match shifted back by the same offset, once as is and
//!    once with a uniform jitter in `{-1, 0, 1}` per axis, then the
//!    neighbor's match unshifted (jump-flood style, which lets strongly
//!    favored keys spread);
//! 2. one random-search sample around the current best, drawn uniformly from
//!    a box whose half-width on each axis is `extent >> k`, where `k` cycles
//!    through `0..bits(max extent)` over the iterations (at least 1).
//!
//! Candidates are clamped into the key grid and accepted only if they
//! strictly lower the weighted distance, so the total never increases.
//! An iteration reads only the previous iteration's field; randomness for
//! query `q` in iteration `i` comes from ChaCha8 stream `i + 1` at word
//! `64 q`. The result is therefore identical for any thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::patch::PatchGrid;
use crate::rng;
use crate::video::Shape3;

/// Random words reserved per query per iteration.
const WORDS_PER_QUERY: u128 = 64;

const NEIGHBORS: [(i64, i64, i64); 6] = [
    (-1, 0, 0),
    (1, 0, 0),
    (0, -1, 0),
    (0, 1, 0),
    (0, 0, -1),
    (0, 0, 1),
];

/// One positive, finite weight per key grid position.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField(Vec<f32>);

impl WeightField {
    pub fn new(weights: Vec<f32>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param(
                "weights",
                format!("weight {i} is {}, must be positive and finite", weights[i]),
            ));
        }
        Ok(WeightField(weights))
    }

    pub fn uniform(len: usize) -> Self {
        WeightField(vec![1.0; len])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f32) -> Result<Self> {
        WeightField::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Which nearest-neighbor search a caller wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    PatchMatch,
    Exhaustive,
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patchmatch" => Ok(Solver::PatchMatch),
            "exhaustive" => Ok(Solver::Exhaustive),
            other => Err(Error::param(
                "solver",
                format!("expected `patchmatch` or `exhaustive`, got `{other}`"),
            )),
        }
    }
}

/// Jump-flood step schedule: every step in `steps` is run `passes_per_step`
/// times, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMatchParams {
    pub steps: Vec<usize>,
    pub passes_per_step: usize,
}

impl Default for PatchMatchParams {
    fn default() -> Self {
        PatchMatchParams {
            steps: vec![8, 4, 1],
            passes_per_step: 5,
        }
    }
}

impl PatchMatchParams {
    fn schedule(&self) -> Result<Vec<usize>> {
        if self.steps.is_empty() || self.passes_per_step == 0 {
            return Err(Error::param("patchmatch", "schedule has zero iterations"));
        }
        if self.steps.contains(&0) {
            return Err(Error::param("patchmatch", "steps must be positive"));
        }
        Ok(self
            .steps
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, self.passes_per_step))
            .collect())
    }
}

/// Best key per query and its weighted distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NNField {
    query_dims: Shape3,
    key_dims: Shape3,
    matches: Vec<usize>,
    distances: Vec<f32>,
}

impl NNField {
    pub fn query_dims(&self) -> Shape3 {
        self.query_dims
    }

    pub fn key_dims(&self) -> Shape3 {
        self.key_dims
    }

    /// Linear key grid index matched by each query.
    pub fn matches(&self) -> &[usize] {
        &self.matches
    }

    pub fn distances(&self) -> &[f32] {
        &self.distances
    }

    /// Key grid position `(t, y, x)` matched by query `q`.
    pub fn key_position(&self, q: usize) -> (usize, usize, usize) {
        self.key_dims.position(self.matches[q])
    }

    pub fn total_distance(&self) -> f64 {
        self.distances.iter().map(|&d| d as f64).sum()
    }
}

#[inline]
fn row_sq_sum(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Mean squared difference of two equally long vectors.
pub fn patch_mse(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "patch lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Empty("patch"));
    }
    Ok(row_sq_sum(a, b) / a.len() as f32)
}

fn check_compatible(q: &PatchGrid<'_>, k: &PatchGrid<'_>) -> Result<()> {
    if q.spec() != k.spec() {
        return Err(Error::ShapeMismatch(format!(
            "query patches {} vs key patches {}",
            q.spec(),
            k.spec()
        )));
    }
    if q.channels() != k.channels() {
        return Err(Error::ShapeMismatch(format!(
            "query has {} channels, keys have {}",
            q.channels(),
            k.channels()
        )));
    }
    if q.is_empty() || k.is_empty() {
        return Err(Error::Empty("patch grid"));
    }
    Ok(())
}

/// Unweighted MSE between query patch `qi` and key patch `ki`.
///
/// Sums row by row in patch order; every distance the solvers store is
/// computed by this same routine, so stored values can be re-derived exactly.
pub fn patch_distance(q: &PatchGrid<'_>, qi: usize, k: &PatchGrid<'_>, ki: usize) -> f32 {
    let mut sum = 0.0f32;
    for (a, b) in q.rows(qi).zip(k.rows(ki)) {
        sum += row_sq_sum(a, b);
    }
    sum / q.patch_len() as f32
}

/// A query grid, a key grid, key weights and optionally a set of keys that
/// may be matched (all others are never returned).
#[derive(Debug, Clone)]
pub struct MatchProblem<'p, 'v> {
    queries: &'p PatchGrid<'v>,
    keys: &'p PatchGrid<'v>,
    weights: &'p WeightField,
    allowed: Option<&'p [bool]>,
    allowed_list: Vec<usize>,
}

impl<'p, 'v> MatchProblem<'p, 'v> {
    pub fn new(
        queries: &'p PatchGrid<'v>,
        keys: &'p PatchGrid<'v>,
        weights: &'p WeightField,
    ) -> Result<Self> {
        check_compatible(queries, keys)?;
        if weights.len() != keys.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} keys",
                weights.len(),
                keys.len()
            )));
        }
        Ok(MatchProblem {
            queries,
            keys,
            weights,
            allowed: None,
            allowed_list: Vec::new(),
        })
    }

    /// Restrict matches to keys `j` with `allowed[j]`.
    pub fn with_allowed(mut self, allowed: &'p [bool]) -> Result<Self> {
        if allowed.len() != self.keys.len() {
            return Err(Error::ShapeMismatch(format!(
                "allowed-key mask has {} entries for {} keys",
                allowed.len(),
                self.keys.len()
            )));
        }
        let list: Vec<usize> = (0..allowed.len()).filter(|&j| allowed[j]).collect();
        if list.is_empty() {
            return Err(Error::Empty("allowed key set"));
        }
        self.allowed = Some(allowed);
        self.allowed_list = list;
        Ok(self)
    }

    #[inline]
    fn is_allowed(&self, k: usize) -> bool {
        self.allowed.is_none_or(|a| a[k])
    }

    pub fn weighted_distance(&self, q: usize, k: usize) -> f32 {
        self.weights.0[k] * patch_distance(self.queries, q, self.keys, k)
    }

    /// Weighted distance of `(q, k)` if it is strictly below `bound`.
    #[inline]
    fn distance_below(&self, q_origin: usize, k: usize, bound: f32) -> Option<f32> {
        let qd = self.queries.source().data();
        let kd = self.keys.source().data();
        let k_origin = self.keys.origin(k);
        let len = self.queries.row_len();
        let n = self.queries.patch_len() as f32;
        let w = self.weights.0[k];
        let mut sum = 0.0f32;
        for (&qo, &ko) in self
            .queries
            .row_offsets()
            .iter()
            .zip(self.keys.row_offsets())
        {
            let a = &qd[q_origin + qo..q_origin + qo + len];
            let b = &kd[k_origin + ko..k_origin + ko + len];
            sum += row_sq_sum(a, b);
            // Partial sums only grow, so this can only discard non-improvements.
            if w * (sum / n) >= bound {
                return None;
            }
        }
        Some(w * (sum / n))
    }

    /// Brute-force search; ties go to the smallest key index.
    pub fn exhaustive(&self) -> NNField {
        let nk = self.keys.len();
        let (matches, distances) = (0..self.queries.len())
            .into_par_iter()
            .map(|q| {
                let origin = self.queries.origin(q);
                let mut best = (usize::MAX, f32::INFINITY);
                for k in 0..nk {
                    if !self.is_allowed(k) {
                        continue;
                    }
                    if let Some(d) = self.distance_below(origin, k, best.1) {
                        best = (k, d);
                    }
                }
                best
            })
            .unzip();
        self.field(matches, distances)
    }

    fn field(&self, matches: Vec<usize>, distances: Vec<f32>) -> NNField {
        NNField {
            query_dims: self.queries.dims(),
            key_dims: self.keys.dims(),
            matches,
            distances,
        }
    }

    /// Uniformly random initial field.
    fn random_field(&self, seed: u64) -> NNField {
        let nk = self.keys.len();
        let (matches, distances) = (0..self.queries.len())
            .into_par_iter()
            .map(|q| {
                let mut r = rng::stream_at(seed, 0, q as u128 * WORDS_PER_QUERY);
                let k = if self.allowed.is_some() {
                    self.allowed_list[r.random_range(0..self.allowed_list.len())]
                } else {
                    r.random_range(0..nk)
                };
                (k, self.weighted_distance(q, k))
            })
            .unzip();
        self.field(matches, distances)
    }

    pub fn patchmatch(&self, seed: u64, params: &PatchMatchParams) -> Result<NNField> {
        Ok(self.patchmatch_traced(seed, params)?.0)
    }

    /// PatchMatch, also returning the total weighted distance after the
    /// random initialization and after every iteration.
    pub fn patchmatch_traced(
        &self,
        seed: u64,
        params: &PatchMatchParams,
    ) -> Result<(NNField, Vec<f64>)> {
        let schedule = params.schedule()?;
        let mut field = self.random_field(seed);
        let mut trace = vec![field.total_distance()];
        let kd = self.keys.dims();
        let radius_levels = usize::BITS - kd.t.max(kd.h).max(kd.w).leading_zeros();
        for (it, &step) in schedule.iter().enumerate() {
            let shrink = it as u32 % radius_levels;
            let prev = &field;
            let (matches, distances) = (0..self.queries.len())
                .into_par_iter()
                .map(|q| self.improve(q, prev, step, shrink, seed, it as u64 + 1))
                .unzip();
            field = self.field(matches, distances);
            trace.push(field.total_distance());
        }
        Ok((field, trace))
    }

    fn improve(
        &self,
        q: usize,
        prev: &NNField,
        step: usize,
        shrink: u32,
        seed: u64,
        stream: u64,
    ) -> (usize, f32) {
        let qdims = self.queries.dims();
        let kd = self.keys.dims();
        let origin = self.queries.origin(q);
        let mut r = rng::stream_at(seed, stream, q as u128 * WORDS_PER_QUERY);
        let mut best = (prev.matches[q], prev.distances[q]);
        let consider = |k: usize, best: &mut (usize, f32)| {
            if k != best.0 && self.is_allowed(k) {
                if let Some(d) = self.distance_below(origin, k, best.1) {
                    *best = (k, d);
                }
            }
        };
        let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
        let (qt, qy, qx) = qdims.position(q);
        let s = step as i64;
        for (dt, dy, dx) in NEIGHBORS {
            let jitter: [i64; 3] = [
                r.random_range(-1..=1),
                r.random_range(-1..=1),
                r.random_range(-1..=1),
            ];
            let (nt, ny, nx) = (qt as i64 + dt * s, qy as i64 + dy * s, qx as i64 + dx * s);
            if nt < 0
                || ny < 0
                || nx < 0
                || nt >= qdims.t as i64
                || ny >= qdims.h as i64
                || nx >= qdims.w as i64
            {
                continue;
            }
            let neighbor_match = prev.matches[qdims.index(nt as usize, ny as usize, nx as usize)];
            let (mt, my, mx) = kd.position(neighbor_match);
            let (ct, cy, cx) = (mt as i64 - dt * s, my as i64 - dy * s, mx as i64 - dx * s);
            consider(
                kd.index(clamp(ct, kd.t), clamp(cy, kd.h), clamp(cx, kd.w)),
                &mut best,
            );
            consider(
                kd.index(
                    clamp(ct + jitter[0], kd.t),
                    clamp(cy + jitter[1], kd.h),
                    clamp(cx + jitter[2], kd.w),
                ),
                &mut best,
            );
            consider(neighbor_match, &mut best);
        }
        let (bt, by, bx) = kd.position(best.0);
        let mut sample = |c: usize, n: usize| {
            let radius = (n >> shrink).max(1);
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(n - 1);
            r.random_range(lo..=hi)
        };
        let cand = kd.index(sample(bt, kd.t), sample(by, kd.h), sample(bx, kd.w));
        consider(cand, &mut best);
        best
    }

    /// Improve `start` by trying, for each query, every key produced by
    /// `candidates(q)` in order (strict improvement only).
    pub fn refine<I>(&self, start: &NNField, candidates: impl Fn(usize) -> I + Sync) -> NNField
    where
        I: IntoIterator<Item = usize>,
    {
        let (matches, distances) = (0..self.queries.len())
            .into_par_iter()
            .map(|q| {
                let origin = self.queries.origin(q);
                let mut best = (start.matches[q], start.distances[q]);
                for k in candidates(q) {
                    if k != best.0 && self.is_allowed(k) {
                        if let Some(d) = self.distance_below(origin, k, best.1) {
                            best = (k, d);
                        }
                    }
                }
                best
            })
            .unzip();
        self.field(matches, distances)
    }

    /// Field with every query matched to key `k` (distances filled in).
    pub fn constant_field(&self, k: usize) -> NNField {
        let (matches, distances) = (0..self.queries.len())
            .map(|q| (k, self.weighted_distance(q, k)))
            .unzip();
        self.field(matches, distances)
    }
}

/// Brute-force weighted NNF.
pub fn exhaustive_nnf(q: &PatchGrid<'_>, k: &PatchGrid<'_>, w: &WeightField) -> Result<NNField> {
    Ok(MatchProblem::new(q, k, w)?.exhaustive())
}

/// Weighted PatchMatch NNF.
pub fn patchmatch_nnf(
    q: &PatchGrid<'_>,
    k: &PatchGrid<'_>,
    w: &WeightField,
    seed: u64,
    params: &PatchMatchParams,
) -> Result<NNField> {
    MatchProblem::new(q, k, w)?.patchmatch(seed, params)
}
