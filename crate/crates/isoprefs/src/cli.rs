//! The `isoprefs` command line: `generate`, `score`, `eval` and `bench`.
//!
//! Exit codes: 0 success, 2 argument or configuration error, 3 data error,
//! 4 runtime error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use isoprefs_core::baseline::IsolationForest;
use isoprefs_core::datasets::{
    generate_primitive_2d_scaled, generate_stream, generate_surface_grid, Cluster, Defect, PrimitiveKind, StreamSpec,
    SurfaceShape,
};
use isoprefs_core::geometry::{Label, LabeledDataset, ModelFamily};
use isoprefs_core::isolation::DepthHistogram;
use isoprefs_core::metrics::{mean_std, roc_auc};
use isoprefs_core::online::{OnlineForest, OnlineParams};
use isoprefs_core::pif::{isolate, preference_matrix, run_pif, Engine, ModelCount, PifConfig, Space};
use isoprefs_core::preference::{Distance, PreferenceMode};
use isoprefs_core::rng::{self, streams};
use isoprefs_core::ruzhash::{RzForestParams, RzHashForest};
use isoprefs_core::sliding::{sliding_pif, RangeImage, SigmaMode, SlidingConfig};
use isoprefs_core::voronoi::{VoronoiForest, VoronoiParams};

use crate::formats::{self, FormatError, DEFAULT_CSV_SIGMA};
use crate::manifest::Manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Format(_) | CliError::Data(_) => EXIT_DATA,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }
}

impl From<isoprefs_core::Error> for CliError {
    fn from(e: isoprefs_core::Error) -> Self {
        use isoprefs_core::Error as E;
        match e {
            E::InvalidDataset(_) | E::DimensionMismatch { .. } | E::LengthMismatch { .. } | E::DegenerateLabels => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "isoprefs", version, about = "Preference-space and streaming isolation forests")]
pub struct Cli {
    /// Worker threads; falls back to ISOPREFS_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset, range image or stream.
    Generate(GenerateArgs),
    /// Score a dataset and write the scores plus a run manifest.
    Score(ScoreArgs),
    /// ROC AUC of a scores file, or of repeated seeded runs.
    Eval(EvalArgs),
    /// Per-phase wall times across a branching-factor or size sweep.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Stair3,
    Stair4,
    Star5,
    Star11,
    Circle3,
    Circle4,
    Circle5,
    Surface,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Plane,
    Paraboloid,
    SphereCap,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Points per structure are multiplied by this factor.
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::Paraboloid)]
    pub shape: ShapeArg,
    #[arg(long, default_value_t = 200)]
    pub side: usize,
    /// Height noise of surfaces.
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    /// Pit radius in pixels; no pit when absent.
    #[arg(long)]
    pub defect_radius: Option<f64>,
    /// Pit depth in multiples of sigma.
    #[arg(long, default_value_t = 10.0)]
    pub defect_depth: f64,
    /// Pit centre as `row,col`; the image centre by default.
    #[arg(long, value_parser = parse_pair)]
    pub defect_center: Option<(f64, f64)>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 0.02)]
    pub anomaly_rate: f64,
    /// Stream index where both clusters move by `--drift-shift`.
    #[arg(long)]
    pub drift_at: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub drift_shift: f64,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected row,col")?;
    let a = a.trim().parse().map_err(|_| format!("bad row {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad col {b:?}"))?;
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Vifor,
    Rzhash,
    Online,
    Sliding,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Tanimoto,
    Ruzicka,
    Jaccard,
    Euclidean,
}

impl From<MetricArg> for Distance {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Tanimoto => Distance::Tanimoto,
            MetricArg::Ruzicka => Distance::Ruzicka,
            MetricArg::Jaccard => Distance::Jaccard,
            MetricArg::Euclidean => Distance::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Line,
    Circle,
    Plane,
    Sphere,
    Quadric,
}

impl From<FamilyArg> for ModelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Line => ModelFamily::Line2d,
            FamilyArg::Circle => ModelFamily::Circle2d,
            FamilyArg::Plane => ModelFamily::Plane3d,
            FamilyArg::Sphere => ModelFamily::Sphere3d,
            FamilyArg::Quadric => ModelFamily::Quadric3d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Preference,
    Ambient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Binary,
}

/// Engine configuration shared by `score`, `eval` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Dataset CSV, or a RIMG file for the sliding engine.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineArg::Vifor)]
    pub engine: EngineArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Tanimoto)]
    pub metric: MetricArg,
    /// Model family; lines for 2D data and planes for 3D data by default.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Preference)]
    pub space: SpaceArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Continuous)]
    pub mode: ModeArg,
    /// Pool size as a multiple of the number of points.
    #[arg(long, default_value_t = 10.0)]
    pub m_factor: f64,
    /// Fixed pool size; overrides `--m-factor` and the sliding budget.
    #[arg(long)]
    pub models: Option<usize>,
    /// Noise scale. Datasets default to 0.02; sliding windows estimate their own.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Inlier threshold multiplier k in epsilon = k sigma.
    #[arg(long, default_value_t = 3.0)]
    pub sigma_k: f64,
    /// Trees of the batch engines.
    #[arg(long = "t", default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 256)]
    pub psi: usize,
    /// Branching factor.
    #[arg(long, default_value_t = 2)]
    pub b: usize,
    /// Trees of the online engine.
    #[arg(long, default_value_t = 32)]
    pub tau: usize,
    /// Online buffer size (default 2048) or sliding window side (default side / 10).
    #[arg(long)]
    pub omega: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub eta: usize,
    /// Online rows per learn/score step.
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    /// Sliding memory budget in bytes.
    #[arg(long, default_value_t = 1 << 30)]
    pub budget: u64,
    /// Bits per preference entry in the sliding memory model.
    #[arg(long, default_value_t = 32)]
    pub entry_bits: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Manifest to append to; `<output>.manifest.jsonl` by default.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write the preference matrix as CSV.
    #[arg(long)]
    pub dump_preferences: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores file to evaluate against `--labels`.
    #[arg(long, requires = "labels")]
    pub scores: Option<PathBuf>,
    /// Dataset CSV, or a RIMG file with a ground-truth mask.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Without `--scores`: score `--input` this many times with seeds
    /// `seed, seed + 1, …`.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Embed,
    Build,
    Score,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Engines to compare; `--engine` alone by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub engines: Vec<EngineArg>,
    /// Branching factors to sweep.
    #[arg(long, value_delimiter = ',')]
    pub b_sweep: Vec<usize>,
    /// Stream lengths to sweep (online engine; streams are generated).
    #[arg(long, value_delimiter = ',')]
    pub n_sweep: Vec<usize>,
    /// Dataset to generate when no `--input` is given.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub phases: Vec<PhaseArg>,
    /// Repetitions per configuration; the median time is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_RUNTIME;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let value = match (flag, std::env::var("ISOPREFS_THREADS")) {
        (Some(t), _) => t,
        (None, Ok(s)) if !s.trim().is_empty() => {
            s.trim().parse().map_err(|_| CliError::config(format!("ISOPREFS_THREADS must be a positive integer, got {s:?}")))?
        }
        _ => return Ok(None),
    };
    if value == 0 {
        return Err(CliError::config("--threads must be at least 1"));
    }
    Ok(Some(value))
}

fn primitive(kind: KindArg) -> Option<PrimitiveKind> {
    Some(match kind {
        KindArg::Stair3 => PrimitiveKind::Stair3,
        KindArg::Stair4 => PrimitiveKind::Stair4,
        KindArg::Star5 => PrimitiveKind::Star5,
        KindArg::Star11 => PrimitiveKind::Star11,
        KindArg::Circle3 => PrimitiveKind::Circle3,
        KindArg::Circle4 => PrimitiveKind::Circle4,
        KindArg::Circle5 => PrimitiveKind::Circle5,
        KindArg::Surface | KindArg::Stream => return None,
    })
}

/// Two-Gaussian stream of `n` points, with both clusters shifted from
/// `drift_at` on.
pub fn stream_spec(n: usize, d: usize, anomaly_rate: f64, drift_at: Option<usize>, drift_shift: f64) -> StreamSpec {
    let mut spec = StreamSpec::two_gaussians(n, d, anomaly_rate);
    if let Some(at) = drift_at {
        let moved: Vec<Cluster> = spec
            .clusters
            .iter()
            .map(|c| Cluster { mean: c.mean.iter().map(|m| m + drift_shift).collect(), ..c.clone() })
            .collect();
        spec.drift.push((at, moved));
    }
    spec
}

fn summary(n: usize, d: usize, anomalies: usize) {
    let frac = if n == 0 { 0.0 } else { anomalies as f64 / n as f64 };
    println!("n={n} d={d} anomaly_fraction={frac:.6}");
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    if a.scale == 0 {
        return Err(CliError::config("--scale must be at least 1"));
    }
    if let Some(kind) = primitive(a.kind) {
        let data = generate_primitive_2d_scaled(kind, a.scale, a.seed);
        formats::write_dataset(&a.output, &data)?;
        summary(data.len(), data.dim(), data.anomaly_count());
        return Ok(());
    }
    match a.kind {
        KindArg::Surface => {
            let shape = match a.shape {
                ShapeArg::Plane => SurfaceShape::Plane,
                ShapeArg::Paraboloid => SurfaceShape::Paraboloid,
                ShapeArg::SphereCap => SurfaceShape::SphereCap,
            };
            let mid = a.side as f64 / 2.0;
            let defect = a.defect_radius.map(|radius_px| Defect {
                center: a.defect_center.unwrap_or((mid, mid)),
                radius_px,
                depth_sigmas: a.defect_depth,
            });
            let image = generate_surface_grid(shape, a.side, a.sigma, defect, a.seed).map_err(config_err)?;
            formats::write_rimg(&a.output, &image)?;
            let anomalies = image.gt_mask().map_or(0, |g| g.iter().filter(|&&v| v).count());
            summary(a.side * a.side, 3, anomalies);
        }
        KindArg::Stream => {
            let spec = stream_spec(a.n, a.d, a.anomaly_rate, a.drift_at, a.drift_shift);
            let data = generate_stream(&spec, a.seed).map_err(config_err)?;
            formats::write_dataset(&a.output, &data)?;
            summary(data.len(), data.dim(), data.anomaly_count());
        }
        _ => unreachable!("primitive kinds handled above"),
    }
    Ok(())
}

fn config_err(e: isoprefs_core::Error) -> CliError {
    CliError::config(e.to_string())
}

/// Output of one scoring run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub scores: Vec<f64>,
    /// Labels aligned with `scores`, when the input carries them.
    pub labels: Option<Vec<Label>>,
    pub depth_histogram: DepthHistogram,
    pub models: usize,
    /// Image width for sliding runs.
    pub width: Option<usize>,
    pub extra: Value,
}

enum Input {
    Points(LabeledDataset),
    Image(RangeImage),
}

fn load_input(e: &EngineArgs) -> Result<Input> {
    let path = e.input.as_deref().ok_or_else(|| CliError::config("--input is required"))?;
    if e.engine == EngineArg::Sliding {
        Ok(Input::Image(formats::read_rimg(path)?))
    } else {
        Ok(Input::Points(formats::read_dataset(path, e.sigma.unwrap_or(DEFAULT_CSV_SIGMA))?))
    }
}

fn family_for(e: &EngineArgs, dim: usize) -> Result<ModelFamily> {
    match (e.family, dim) {
        (Some(f), _) => Ok(f.into()),
        (None, 2) => Ok(ModelFamily::Line2d),
        (None, 3) => Ok(ModelFamily::Plane3d),
        (None, d) => Err(CliError::config(format!("no default model family for {d}-dimensional data; pass --family"))),
    }
}

fn mode(e: &EngineArgs) -> PreferenceMode {
    match e.mode {
        ModeArg::Continuous => PreferenceMode::Continuous,
        ModeArg::Binary => PreferenceMode::Binary,
    }
}

/// Checks the parameter combination before any work, listing every problem.
pub fn validate(e: &EngineArgs) -> Result<()> {
    let mut problems = Vec::new();
    if e.input.is_none() {
        problems.push("--input is required".to_owned());
    }
    if let Some(s) = e.sigma {
        if !(s > 0.0 && s.is_finite()) {
            problems.push("--sigma must be positive".to_owned());
        }
    }
    if !(e.sigma_k > 0.0 && e.sigma_k.is_finite()) {
        problems.push("--sigma-k must be positive".to_owned());
    }
    match e.engine {
        EngineArg::Vifor | EngineArg::Rzhash | EngineArg::Baseline => {
            if e.trees == 0 {
                problems.push("--t must be at least 1".to_owned());
            }
            if e.b < 2 || e.b > e.psi {
                problems.push("--b must lie in [2, psi]".to_owned());
            }
            if !(e.m_factor > 0.0 && e.m_factor.is_finite()) {
                problems.push("--m-factor must be positive".to_owned());
            }
            if e.models == Some(0) && e.space == SpaceArg::Preference {
                problems.push("--models must be at least 1".to_owned());
            }
            if e.engine == EngineArg::Rzhash && e.space == SpaceArg::Ambient {
                problems.push("the rzhash engine needs preference space".to_owned());
            }
            if e.engine == EngineArg::Baseline && e.b != 2 {
                problems.push("the baseline forest is binary; drop --b".to_owned());
            }
        }
        EngineArg::Online => {
            let params = OnlineParams::new(e.tau, e.omega.unwrap_or(2048), e.eta);
            if let Err(err) = params.validate() {
                problems.push(err.to_string());
            }
            if e.batch == 0 {
                problems.push("--batch must be at least 1".to_owned());
            }
        }
        EngineArg::Sliding => {
            if e.trees == 0 {
                problems.push("--t must be at least 1".to_owned());
            }
            if e.b < 2 || e.b > e.psi {
                problems.push("--b must lie in [2, psi]".to_owned());
            }
            if e.omega == Some(0) {
                problems.push("--omega must be at least 1".to_owned());
            }
            if let Some(f) = e.family {
                if ModelFamily::from(f).ambient_dim() != 3 {
                    problems.push("the sliding engine needs a 3D model family".to_owned());
                }
            }
            if e.entry_bits == 0 {
                problems.push("--entry-bits must be positive".to_owned());
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(problems))
    }
}

fn pif_config(e: &EngineArgs, family: ModelFamily) -> PifConfig {
    let engine = match e.engine {
        EngineArg::Rzhash => Engine::RzHash,
        EngineArg::Baseline => Engine::IForest,
        _ => Engine::Voronoi(e.metric.into()),
    };
    PifConfig {
        models: e.models.map_or(ModelCount::Factor(e.m_factor), ModelCount::Fixed),
        sigma: e.sigma,
        k_multiplier: e.sigma_k,
        mode: mode(e),
        space: match e.space {
            SpaceArg::Preference => Space::Preference,
            SpaceArg::Ambient => Space::Ambient,
        },
        trees: e.trees,
        psi: e.psi,
        branching: e.b,
        ..PifConfig::new(family, engine)
    }
}

fn sliding_config(e: &EngineArgs, image: &RangeImage) -> SlidingConfig {
    let omega = e.omega.unwrap_or((image.height().min(image.width()) / 10).max(1));
    SlidingConfig {
        engine: match e.engine {
            EngineArg::Vifor => Engine::Voronoi(e.metric.into()),
            _ => Engine::RzHash,
        },
        trees: e.trees,
        psi: e.psi,
        branching: e.b,
        budget_bytes: e.budget,
        entry_bits: e.entry_bits,
        models: e.models,
        sigma: e.sigma.map_or(SigmaMode::Robust, SigmaMode::Fixed),
        k_multiplier: e.sigma_k,
        mode: mode(e),
        ..SlidingConfig::new(e.family.map_or(ModelFamily::Plane3d, Into::into), omega)
    }
}

fn score_input(e: &EngineArgs, input: &Input, seed: u64, dump: Option<&Path>) -> Result<Scored> {
    match input {
        Input::Image(image) => {
            let config = sliding_config(e, image);
            let out = sliding_pif(image, &config, seed)?;
            let extra = json!({
                "omega": config.omega,
                "windows": out.windows,
                "skipped_windows": out.skipped.len(),
                "models_per_window": out.models_per_window,
            });
            let labels = image.gt_mask().map(|g| g.iter().map(|&a| if a { Label::Anomaly } else { Label::Genuine }).collect());
            let models = out.models_per_window;
            Ok(Scored { scores: out.scores, labels, depth_histogram: out.depth_histogram, models, width: Some(image.width()), extra })
        }
        Input::Points(data) if e.engine == EngineArg::Online => {
            let params = OnlineParams::new(e.tau, e.omega.unwrap_or(2048), e.eta);
            let points: Vec<Vec<f64>> = data.points().map(<[f64]>::to_vec).collect();
            let mut forest = OnlineForest::new(params, data.dim(), &mut rng::stream(seed, streams::FOREST))?;
            let mut scores = Vec::with_capacity(points.len());
            for chunk in points.chunks(e.batch.max(1)) {
                scores.extend(forest.process_batch(chunk)?);
            }
            let extra = json!({ "omega": params.omega, "depth_cap": forest.depth_cap() });
            Ok(Scored {
                scores,
                labels: Some(data.labels().to_vec()),
                depth_histogram: forest.depth_histogram(),
                models: 0,
                width: None,
                extra,
            })
        }
        Input::Points(data) => {
            let config = pif_config(e, family_for(e, data.dim())?);
            let out = match dump {
                Some(path) if config.space == Space::Preference => {
                    config.validate().map_err(config_err)?;
                    let matrix = preference_matrix(data, &config, &mut rng::stream(seed, streams::MODELS))?;
                    formats::write_preferences(path, &matrix)?;
                    let (scores, depth_histogram) = isolate(&matrix, &config, &mut rng::stream(seed, streams::FOREST))?;
                    isoprefs_core::pif::PifOutput { scores, depth_histogram, models: matrix.cols() }
                }
                _ => run_pif(data, &config, seed)?,
            };
            Ok(Scored {
                scores: out.scores,
                labels: Some(data.labels().to_vec()),
                depth_histogram: out.depth_histogram,
                models: out.models,
                width: None,
                extra: json!({ "family": config.family.name() }),
            })
        }
    }
}

/// Validates `e`, loads its input and scores it with `seed`.
pub fn score_once(e: &EngineArgs, seed: u64) -> Result<Scored> {
    validate(e)?;
    let input = load_input(e)?;
    score_input(e, &input, seed, None)
}

fn config_json(e: &EngineArgs) -> Value {
    json!({
        "input": e.input.as_ref().map(|p| p.display().to_string()),
        "engine": format!("{:?}", e.engine).to_lowercase(),
        "metric": format!("{:?}", e.metric).to_lowercase(),
        "family": e.family.map(|f| format!("{f:?}").to_lowercase()),
        "space": format!("{:?}", e.space).to_lowercase(),
        "mode": format!("{:?}", e.mode).to_lowercase(),
        "m_factor": e.m_factor,
        "models": e.models,
        "sigma": e.sigma,
        "sigma_k": e.sigma_k,
        "t": e.trees,
        "psi": e.psi,
        "b": e.b,
        "tau": e.tau,
        "omega": e.omega,
        "eta": e.eta,
        "batch": e.batch,
        "budget": e.budget,
        "entry_bits": e.entry_bits,
        "seed": e.seed,
    })
}

fn default_manifest(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.jsonl");
    PathBuf::from(s)
}

fn write_scored(path: &Path, e: &EngineArgs, s: &Scored) -> Result<()> {
    match (e.engine, &s.labels, s.width) {
        (EngineArg::Sliding, _, Some(w)) => formats::write_score_map(path, w, &s.scores)?,
        (EngineArg::Online, Some(labels), _) => formats::write_stream_scores(path, &s.scores, labels)?,
        _ => formats::write_scores(path, &s.scores)?,
    }
    Ok(())
}

pub fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let e = &a.engine;
    validate(e)?;
    let input = load_input(e)?;
    let start = Instant::now();
    let scored = score_input(e, &input, e.seed, a.dump_preferences.as_deref())?;
    let wall = start.elapsed().as_secs_f64();
    write_scored(&a.output, e, &scored)?;
    let mut m = Manifest::new("score");
    m.set("config", config_json(e))
        .set("seed", e.seed)
        .set("output", a.output.display().to_string())
        .set("points", scored.scores.len())
        .set("models", scored.models)
        .set("wall_seconds", wall)
        .set("details", scored.extra.clone())
        .depth_histogram(&scored.depth_histogram);
    let path = a.manifest.clone().unwrap_or_else(|| default_manifest(&a.output));
    m.append(&path).map_err(|err| CliError::Runtime(format!("{}: {err}", path.display())))?;
    Ok(())
}

fn labels_from(path: &Path) -> Result<Vec<Option<Label>>> {
    let mut head = [0u8; 4];
    let is_rimg = std::fs::File::open(path)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut head))
        .map(|_| &head == b"RIMG")
        .unwrap_or(false);
    if is_rimg {
        let image = formats::read_rimg(path)?;
        let gt = image.gt_mask().ok_or_else(|| CliError::Data(format!("{}: image has no ground-truth mask", path.display())))?;
        Ok(gt
            .iter()
            .zip(image.valid())
            .map(|(&a, &v)| v.then_some(if a { Label::Anomaly } else { Label::Genuine }))
            .collect())
    } else {
        Ok(formats::read_labels(path)?.into_iter().map(Some).collect())
    }
}

/// AUC over the entries that have a label and a finite score.
fn auc_of(scores: &[f64], labels: &[Option<Label>]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(CliError::Data(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    let (s, l): (Vec<f64>, Vec<Label>) =
        scores.iter().zip(labels).filter_map(|(s, l)| l.filter(|_| s.is_finite()).map(|l| (*s, l))).unzip();
    Ok(roc_auc(&s, &l)?)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let aucs = if let Some(scores_path) = &a.scores {
        let labels_path = a.labels.as_ref().ok_or_else(|| CliError::config("--scores needs --labels"))?;
        let scores = formats::read_scores(scores_path)?;
        vec![auc_of(&scores, &labels_from(labels_path)?)?]
    } else {
        if a.runs == 0 {
            return Err(CliError::config("--runs must be at least 1"));
        }
        let e = &a.engine;
        validate(e)?;
        let input = load_input(e)?;
        let labels = match &a.labels {
            Some(p) => Some(labels_from(p)?),
            None => None,
        };
        let mut out = Vec::with_capacity(a.runs);
        for r in 0..a.runs {
            let scored = score_input(e, &input, e.seed + r as u64, None)?;
            let labels = match (&labels, &scored.labels, &input) {
                (Some(l), _, _) => l.clone(),
                (None, Some(l), Input::Image(image)) => {
                    l.iter().zip(image.valid()).map(|(l, &v)| v.then_some(*l)).collect()
                }
                (None, Some(l), _) => l.iter().copied().map(Some).collect(),
                (None, None, _) => return Err(CliError::Data("the input carries no labels; pass --labels".into())),
            };
            out.push(auc_of(&scored.scores, &labels)?);
        }
        out
    };
    let (mean, std) = mean_std(&aucs);
    if a.json {
        println!("{}", json!({ "runs": aucs.len(), "auc": aucs, "mean": mean, "std": std }));
    } else if aucs.len() == 1 {
        println!("auc={}", formats::sig9(aucs[0]));
    } else {
        println!("runs={} auc_mean={} auc_std={}", aucs.len(), formats::sig9(mean), formats::sig9(std));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub engine: &'static str,
    pub b: usize,
    pub n: usize,
    pub m: usize,
    pub phase: &'static str,
    pub seconds: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn engine_name(e: EngineArg) -> &'static str {
    match e {
        EngineArg::Vifor => "vifor",
        EngineArg::Rzhash => "rzhash",
        EngineArg::Online => "online",
        EngineArg::Sliding => "sliding",
        EngineArg::Baseline => "baseline",
    }
}

/// Times each phase once: embedding, forest build, scoring.
fn time_pif(e: &EngineArgs, data: &LabeledDataset, phases: &[PhaseArg], seed: u64) -> Result<Vec<(&'static str, f64, usize)>> {
    let config = pif_config(e, family_for(e, data.dim())?);
    config.validate().map_err(config_err)?;
    let mut out = Vec::new();
    let t = Instant::now();
    let matrix = preference_matrix(data, &config, &mut rng::stream(seed, streams::MODELS))?;
    let m = matrix.cols();
    if phases.contains(&PhaseArg::Embed) {
        out.push(("embed", t.elapsed().as_secs_f64(), m));
    }
    if !phases.iter().any(|p| *p != PhaseArg::Embed) {
        return Ok(out);
    }
    let rows = &matrix;
    let mut rng = rng::stream(seed, streams::FOREST);
    let t = Instant::now();
    let scorer: Box<dyn Fn() -> Vec<f64> + '_> = match e.engine {
        EngineArg::Rzhash => {
            let params = RzForestParams::new(e.trees, e.psi, e.b);
            let forest = RzHashForest::build(rows, &params, &mut rng)?;
            Box::new(move || forest.score_rows(rows))
        }
        EngineArg::Baseline => {
            let forest = IsolationForest::build(rows, e.trees, e.psi, &mut rng)?;
            Box::new(move || forest.score_rows(rows))
        }
        _ => {
            let params = VoronoiParams::new(e.trees, e.psi, e.b, e.metric.into());
            let forest = VoronoiForest::build(rows, &params, &mut rng)?;
            Box::new(move || forest.anomaly_scores(rows))
        }
    };
    let build = t.elapsed().as_secs_f64();
    if phases.contains(&PhaseArg::Build) {
        out.push(("build", build, m));
    }
    if phases.contains(&PhaseArg::Score) {
        let t = Instant::now();
        std::hint::black_box(scorer());
        out.push(("score", t.elapsed().as_secs_f64(), m));
    }
    Ok(out)
}

fn time_online(e: &EngineArgs, data: &LabeledDataset, seed: u64) -> Result<f64> {
    let params = OnlineParams::new(e.tau, e.omega.unwrap_or(2048), e.eta);
    let points: Vec<Vec<f64>> = data.points().map(<[f64]>::to_vec).collect();
    let t = Instant::now();
    let mut forest = OnlineForest::new(params, data.dim(), &mut rng::stream(seed, streams::FOREST))?;
    for chunk in points.chunks(e.batch.max(1)) {
        std::hint::black_box(forest.process_batch(chunk)?);
    }
    Ok(t.elapsed().as_secs_f64())
}

/// Runs the sweep described by `a` and returns one row per phase.
pub fn bench_rows(a: &BenchArgs) -> Result<Vec<BenchRow>> {
    let engines = if a.engines.is_empty() { vec![a.engine.engine] } else { a.engines.clone() };
    if a.repeats == 0 {
        return Err(CliError::config("--repeats must be at least 1"));
    }
    let phases = if a.phases.is_empty() { vec![PhaseArg::Embed, PhaseArg::Build, PhaseArg::Score] } else { a.phases.clone() };
    let mut rows = Vec::new();
    for &engine in &engines {
        if engine == EngineArg::Sliding {
            return Err(CliError::config("bench does not support the sliding engine"));
        }
        let mut e = a.engine.clone();
        e.engine = engine;
        if engine == EngineArg::Online {
            let sizes = if a.n_sweep.is_empty() { vec![10_000] } else { a.n_sweep.clone() };
            let mut probe = e.clone();
            probe.input.get_or_insert_with(|| PathBuf::from("-"));
            validate(&probe)?;
            for &n in &sizes {
                let data = match &e.input {
                    Some(p) => formats::read_dataset(p, DEFAULT_CSV_SIGMA)?,
                    None => generate_stream(&stream_spec(n, 4, 0.02, None, 0.0), e.seed).map_err(config_err)?,
                };
                let times = (0..a.repeats).map(|_| time_online(&e, &data, e.seed)).collect::<Result<Vec<_>>>()?;
                rows.push(BenchRow { engine: "online", b: 2, n: data.len(), m: 0, phase: "process", seconds: median(times) });
            }
            continue;
        }
        let data = match (&e.input, a.kind.and_then(primitive)) {
            (Some(p), _) => formats::read_dataset(p, e.sigma.unwrap_or(DEFAULT_CSV_SIGMA))?,
            (None, Some(kind)) => generate_primitive_2d_scaled(kind, a.scale.max(1), e.seed),
            (None, None) => return Err(CliError::config("bench needs --input or a 2D --kind")),
        };
        let sweep = if a.b_sweep.is_empty() { vec![e.b] } else { a.b_sweep.clone() };
        for &b in &sweep {
            e.b = b;
            if engine == EngineArg::Baseline && b != 2 {
                continue;
            }
            let mut probe = e.clone();
            probe.input.get_or_insert_with(|| PathBuf::from("-"));
            validate(&probe)?;
            let mut per_phase: Vec<(&'static str, Vec<f64>, usize)> = Vec::new();
            for _ in 0..a.repeats {
                for (i, (phase, secs, m)) in time_pif(&e, &data, &phases, e.seed)?.into_iter().enumerate() {
                    match per_phase.get_mut(i) {
                        Some(slot) => slot.1.push(secs),
                        None => per_phase.push((phase, vec![secs], m)),
                    }
                }
            }
            for (phase, times, m) in per_phase {
                rows.push(BenchRow { engine: engine_name(engine), b, n: data.len(), m, phase, seconds: median(times) });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let start = Instant::now();
    let rows = bench_rows(a)?;
    let mut text = String::from("engine,b,n,m,phase,seconds\n");
    for r in &rows {
        text.push_str(&format!("{},{},{},{},{},{}\n", r.engine, r.b, r.n, r.m, r.phase, formats::sig9(r.seconds)));
    }
    match &a.output {
        Some(path) => {
            std::fs::write(path, &text).map_err(|err| CliError::Runtime(format!("{}: {err}", path.display())))?;
        }
        None => print!("{text}"),
    }
    if let Some(path) = a.manifest.clone().or_else(|| a.output.as_deref().map(default_manifest)) {
        let mut m = Manifest::new("bench");
        m.set("config", config_json(&a.engine))
            .set("b_sweep", a.b_sweep.clone())
            .set("n_sweep", a.n_sweep.clone())
            .set("rows", rows.len())
            .set("wall_seconds", start.elapsed().as_secs_f64());
        m.append(&path).map_err(|err| CliError::Runtime(format!("{}: {err}", path.display())))?;
    }
    Ok(())
}
