//! Video generation and manipulation from a single input video by
//! coarse-to-fine space-time patch nearest-neighbor synthesis.
//!
//! The crate is organized bottom-up:
//!
//! - [`video`] and [`resize`]: the dense [`VideoTensor`], cubic resampling and
//!   temporally replicated noise;
//! - [`pyramid`]: spatio-temporal pyramids with a minimum-size stopping rule;
//! - [`patch`]: stride-1 patch grids and the median fold;
//! - [`nnf`]: weighted nearest-neighbor fields (exhaustive and PatchMatch);
//! - [`vpnn`]: one query/key/value patch nearest-neighbor layer and its
//!   EM-style repetition at a single scale;
//! - [`pipelines`]: generation, retargeting, inpainting and analogies;
//! - [`dynstruct`]: quantized flow-magnitude fields for analogies;
//! - [`metrics`]: diversity index, patch coherence audit, PSNR;
//! - [`io`]: PNG frame directories and raw `VGT1` tensor files.

pub mod dynstruct;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nnf;
pub mod patch;
pub mod pipelines;
pub mod pyramid;
pub mod resize;
pub mod rng;
pub mod video;
pub mod vpnn;

pub use error::{Error, Result};
pub use nnf::{NNField, PatchMatchParams, Solver, WeightField};
pub use patch::{PatchGrid, PatchSpec};
pub use pipelines::{CueMask, PipelineConfig};
pub use pyramid::{Pyramid, ScaleFactors};
pub use video::{Shape3, VideoTensor, VoxelMask};
pub use vpnn::{Search, VpnnConfig};
