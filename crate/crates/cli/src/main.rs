mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use vgpnn::dynstruct::{block_flow, flow_magnitude, kmeans_quantize, quantize_jointly, FlowField};
use vgpnn::{io, metrics, pipelines};
use vgpnn::{CueMask, PatchSpec, PipelineConfig, ScaleFactors, Shape3, Solver, VideoTensor};

use config::ConfigError;

/// Generate and edit videos from a single example by space-time patch
/// nearest-neighbor synthesis.
#[derive(Debug, Parser)]
#[command(name = "vgpnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a new video with the look and motion of the input.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Resize a video to a new shape while keeping its content undistorted.
    #[command(args_override_self = true)]
    Retarget(RetargetArgs),
    /// Fill a masked region, steered by rough cue colors.
    #[command(args_override_self = true)]
    Inpaint(InpaintArgs),
    /// Render the motion of a content video with the appearance of a style video.
    #[command(args_override_self = true)]
    Analogy(AnalogyArgs),
    /// Evaluation metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Debug, Subcommand)]
enum MetricsCommand {
    /// Print the diversity index of a set of generated samples.
    #[command(args_override_self = true)]
    Diversity {
        /// Input frame directory.
        #[arg(long)]
        input: PathBuf,
        /// Sample frame directories (at least two).
        #[arg(long, num_args = 1.., required = true)]
        samples: Vec<PathBuf>,
    },
}

/// Overrides for the pipeline defaults.
#[derive(Debug, Args)]
struct Tuning {
    /// Spatial downscaling factor between pyramid levels.
    #[arg(long)]
    factor_spatial: Option<f64>,
    /// Temporal downscaling factor between pyramid levels.
    #[arg(long)]
    factor_temporal: Option<f64>,
    /// Minimum frame count of the coarsest level.
    #[arg(long)]
    min_t: Option<usize>,
    /// Minimum height and width of the coarsest level.
    #[arg(long)]
    min_s: Option<usize>,
    /// Patch size (TxHxW) on levels above the voxel threshold.
    #[arg(long)]
    patch_small: Option<PatchSpec>,
    /// Patch size (TxHxW) on the other levels.
    #[arg(long)]
    patch_large: Option<PatchSpec>,
    /// EM iterations on levels above the voxel threshold.
    #[arg(long)]
    em_small: Option<usize>,
    /// EM iterations on the other levels.
    #[arg(long)]
    em_large: Option<usize>,
    /// Output voxel count above which the small patch size is used.
    #[arg(long)]
    voxel_threshold: Option<usize>,
    /// Run a single EM iteration on this many of the finest levels.
    #[arg(long)]
    fine_levels_single_em: Option<usize>,
    /// Rareness offset for key weighting.
    #[arg(long, conflicts_with = "uniform_weights")]
    alpha: Option<f32>,
    /// Match with uniform key weights instead of rareness weights.
    #[arg(long)]
    uniform_weights: bool,
    /// Nearest-neighbor solver.
    #[arg(long)]
    solver: Option<Solver>,
    /// PatchMatch propagation step sizes, largest first.
    #[arg(long, value_delimiter = ',')]
    pm_steps: Option<Vec<usize>>,
    /// PatchMatch passes per step size.
    #[arg(long)]
    pm_passes: Option<usize>,
}

impl Tuning {
    fn apply(&self, cfg: &mut PipelineConfig) -> vgpnn::Result<()> {
        if self.factor_spatial.is_some() || self.factor_temporal.is_some() {
            cfg.factors = ScaleFactors::new(
                self.factor_spatial.unwrap_or(cfg.factors.spatial()),
                self.factor_temporal.unwrap_or(cfg.factors.temporal()),
            )?;
        }
        set(&mut cfg.min_t, self.min_t);
        set(&mut cfg.min_s, self.min_s);
        set(&mut cfg.spec_small, self.patch_small);
        set(&mut cfg.spec_large, self.patch_large);
        set(&mut cfg.em_iters_small, self.em_small);
        set(&mut cfg.em_iters_large, self.em_large);
        set(&mut cfg.voxel_threshold, self.voxel_threshold);
        set(&mut cfg.fine_levels_single_em, self.fine_levels_single_em);
        if self.uniform_weights {
            cfg.alpha = None;
        } else if let Some(a) = self.alpha {
            cfg.alpha = Some(a);
        }
        set(&mut cfg.search.solver, self.solver);
        set(&mut cfg.search.patchmatch.steps, self.pm_steps.clone());
        set(&mut cfg.search.patchmatch.passes_per_step, self.pm_passes);
        cfg.validate()
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Input frame directory.
    #[arg(long)]
    input: PathBuf,
    /// Output frame directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the noise added at the coarsest level.
    #[arg(long)]
    noise_std: Option<f32>,
    /// Output frame count as a fraction of the input's.
    #[arg(long)]
    temporal_shrink: Option<f64>,
    /// Explicit output shape TxHxW.
    #[arg(long)]
    out_shape: Option<Shape3>,
    /// Add the coarsest noise to the keys as well as the queries.
    #[arg(long)]
    noisy_keys: bool,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct RetargetArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Output shape TxHxW.
    #[arg(long)]
    target: Shape3,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Args)]
struct InpaintArgs {
    #[arg(long)]
    input: PathBuf,
    /// One-channel 0/1 tensor file marking the voxels to fill.
    #[arg(long)]
    mask: PathBuf,
    /// Three-channel tensor file with cue colors in [-1, 1].
    #[arg(long)]
    cue: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Arbitrary video pairs.
    AllPairs,
    /// Sketch-like content videos.
    Sketch,
}

#[derive(Debug, Args)]
struct AnalogyArgs {
    /// Content frame directory (supplies the motion).
    #[arg(long)]
    content: PathBuf,
    /// Style frame directory (supplies the appearance).
    #[arg(long)]
    style: PathBuf,
    /// Two-channel flow tensor file of the content video.
    #[arg(long, requires = "flow_style", conflicts_with = "block_flow")]
    flow_content: Option<PathBuf>,
    /// Two-channel flow tensor file of the style video.
    #[arg(long, requires = "flow_content", conflicts_with = "block_flow")]
    flow_style: Option<PathBuf>,
    /// Estimate flow by block matching instead of reading flow files.
    #[arg(long, required_unless_present = "flow_content")]
    block_flow: bool,
    /// Block size for --block-flow (odd).
    #[arg(long, default_value_t = 7)]
    block: usize,
    /// Search radius for --block-flow.
    #[arg(long, default_value_t = 4)]
    radius: usize,
    /// Number of flow magnitude bins.
    #[arg(long, default_value_t = 5)]
    bins: usize,
    /// Quantize each video's flow on its own instead of jointly.
    #[arg(long)]
    per_video_bins: bool,
    #[arg(long, value_enum, default_value_t = Preset::AllPairs)]
    preset: Preset,
    /// Fraction of the pyramid height that matches on dynamic structure.
    #[arg(long)]
    aux_fraction: Option<f64>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] vgpnn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(vgpnn::Error::InvalidParameter { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::generation();
    set(&mut cfg.noise_std, a.noise_std);
    set(&mut cfg.temporal_shrink, a.temporal_shrink);
    cfg.out_shape = a.out_shape;
    cfg.noisy_keys = a.noisy_keys;
    cfg.seed = a.seed;
    a.tuning.apply(&mut cfg)?;
    let x = io::read_video(&a.input)?;
    let y = pipelines::generate(&x, &cfg, a.seed)?;
    Ok(io::write_video(&y, &a.output)?)
}

fn retarget(a: &RetargetArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::generation();
    cfg.seed = a.seed;
    a.tuning.apply(&mut cfg)?;
    let x = io::read_video(&a.input)?;
    let y = pipelines::retarget(&x, a.target, &cfg)?;
    Ok(io::write_video(&y, &a.output)?)
}

fn inpaint(a: &InpaintArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::generation();
    cfg.seed = a.seed;
    a.tuning.apply(&mut cfg)?;
    let x = io::read_video(&a.input)?;
    let cue = CueMask::new(io::read_mask(&a.mask)?, io::read_tensor(&a.cue)?)?;
    let y = pipelines::inpaint(&x, &cue, &cfg)?;
    Ok(io::write_video(&y, &a.output)?)
}

fn read_flow(path: &Path) -> Result<FlowField, CliError> {
    Ok(FlowField::new(io::read_tensor(path)?)?)
}

fn analogy(a: &AnalogyArgs) -> Result<(), CliError> {
    let mut cfg = match a.preset {
        Preset::AllPairs => PipelineConfig::analogies_all_pairs(),
        Preset::Sketch => PipelineConfig::analogies_sketch(),
    };
    set(&mut cfg.aux_max_scale_fraction, a.aux_fraction);
    cfg.seed = a.seed;
    a.tuning.apply(&mut cfg)?;
    let c = io::read_video(&a.content)?;
    let s = io::read_video(&a.style)?;
    let (flow_c, flow_s) = match (&a.flow_content, &a.flow_style) {
        (Some(fc), Some(fs)) => (read_flow(fc)?, read_flow(fs)?),
        _ => (
            block_flow(&c, a.block, a.radius)?,
            block_flow(&s, a.block, a.radius)?,
        ),
    };
    let (mag_c, mag_s) = (flow_magnitude(&flow_c), flow_magnitude(&flow_s));
    let (dyn_c, dyn_s) = if a.per_video_bins {
        (
            kmeans_quantize(&mag_c, a.bins)?,
            kmeans_quantize(&mag_s, a.bins)?,
        )
    } else {
        let mut both = quantize_jointly(&[&mag_c, &mag_s], a.bins)?;
        let dyn_s = both.pop().expect("two fields");
        (both.pop().expect("two fields"), dyn_s)
    };
    let y = pipelines::analogies(&c, &s, &dyn_c, &dyn_s, &cfg)?;
    Ok(io::write_video(&y, &a.output)?)
}

fn diversity(input: &Path, samples: &[PathBuf]) -> Result<(), CliError> {
    let x = io::read_video(input)?;
    let ys = samples
        .iter()
        .map(|p| io::read_video(p))
        .collect::<vgpnn::Result<Vec<VideoTensor>>>()?;
    println!("{:.6}", metrics::diversity_index(&x, &ys)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Retarget(a) => retarget(a),
        Command::Inpaint(a) => inpaint(a),
        Command::Analogy(a) => analogy(a),
        Command::Metrics(MetricsCommand::Diversity { input, samples }) => diversity(input, samples),
    }
}

fn init_threads() {
    let Ok(v) = std::env::var("VGPNN_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("VGPNN_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("VGPNN_THREADS must be a positive integer, got `{v}`"),
    }
}

/// Parse argv, folding in `--config FILE` if given.
fn parse_args(mut args: Vec<OsString>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command();
    let fail = |e: ConfigError| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    };
    if let Some(path) = config::take_config_path(&mut args).map_err(fail)? {
        config::apply(&cmd, &mut args, Path::new(&path)).map_err(fail)?;
    }
    cmd.try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
        .map_err(|e| {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { 1 } else { 0 })
        })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_args(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
