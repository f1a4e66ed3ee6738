use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seeded_laplacian::eval::Band;
use seeded_laplacian::features::{parse_cues, AffinityConfig, AugmentMode, Cue};
use seeded_laplacian::robot::{RobotMode, DEFAULT_MAX_STROKES, DEFAULT_RADIUS};
use seeded_laplacian::segment::SegmenterParams;

#[derive(Debug, Parser)]
#[command(name = "seeded-laplacian", version, about = "Scribble-seeded foreground/background segmentation")]
pub struct Cli {
    /// More log output on stderr; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment one image from its scribble raster.
    Segment(SegmentArgs),
    /// Score a dataset manifest.
    Eval(EvalArgs),
    /// Simulate corrective strokes against a ground-truth mask.
    Robot(RobotArgs),
    /// Classify two Gaussian clouds with both solvers.
    Toy(ToyArgs),
    /// Time the solvers over a range of point counts.
    Bench(BenchArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    Multiply,
    Concat,
}

impl From<Layout> for AugmentMode {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Multiply => AugmentMode::Multiply,
            Layout::Concat => AugmentMode::Concat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Single,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Refine {
    Naive,
    Incremental,
}

impl From<Refine> for RobotMode {
    fn from(r: Refine) -> Self {
        match r {
            Refine::Naive => RobotMode::Naive,
            Refine::Incremental => RobotMode::Incremental,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueList(pub Vec<Cue>);

fn cues(s: &str) -> Result<CueList, String> {
    parse_cues(s).map(CueList).map_err(|e| e.to_string())
}

fn band(s: &str) -> Result<Band, String> {
    s.parse().map_err(|e: seeded_laplacian::Error| e.to_string())
}

/// Flags shared by every command that segments images.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Eigenfunctions kept per scale.
    #[arg(long, default_value_t = 100)]
    pub eigvecs: usize,
    #[arg(long, default_value_t = 21)]
    pub pivots_fg: usize,
    #[arg(long, default_value_t = 21)]
    pub pivots_bg: usize,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    /// Histogram bins per feature dimension.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Weight of the luminance gradient in geodesic path costs.
    #[arg(long, default_value_t = 0.5)]
    pub gamma_g: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2")]
    pub scales: Vec<f64>,
    /// Affinity cues: any of rgb, lab, euc, geo, ic.
    #[arg(long, value_parser = cues, default_value = "rgb,lab,euc,geo")]
    pub features: CueList,
}

impl PipelineArgs {
    pub fn params(&self, layout: Layout) -> SegmenterParams {
        SegmenterParams {
            m: self.eigvecs,
            lambda: self.lambda,
            bins: self.bins,
            affinity: AffinityConfig {
                gamma_g: self.gamma_g,
                scales: self.scales.clone(),
                k_fg: self.pivots_fg,
                k_bg: self.pivots_bg,
                cues: self.features.0.clone(),
                mode: layout.into(),
                ..AffinityConfig::default()
            },
            ..SegmenterParams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub image: PathBuf,
    /// Scribble raster: pure green foreground, pure red background.
    pub scribbles: PathBuf,
    /// Output mask PNG.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the image with the mask boundary drawn on it.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Ground-truth mask; reports JI and tints the overlay.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Write the pre-PCA features of the first scale as CSV.
    #[arg(long)]
    pub dump_features: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Layout::Multiply)]
    pub mode: Layout,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Tab-separated manifest: id, image, scribbles, ground truth.
    pub manifest: PathBuf,
    /// CSV report path; the table always goes to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Single)]
    pub mode: Mode,
    /// Feature layout.
    #[arg(long, value_enum, default_value_t = Layout::Multiply)]
    pub augment: Layout,
    /// Override a setting for a control run, e.g. `features=rgb,lab` or
    /// `augment=concat`.
    #[arg(long, value_name = "KEY=VALUE")]
    pub ablate: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_STROKES)]
    pub strokes: usize,
    #[arg(long, value_parser = band, default_value = "0.85:0.98")]
    pub band: Band,
    #[arg(long, value_enum, default_value_t = Refine::Naive)]
    pub refine: Refine,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct RobotArgs {
    pub image: PathBuf,
    pub scribbles: PathBuf,
    pub gt: PathBuf,
    /// Trace CSV path; defaults to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Final mask PNG.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_STROKES)]
    pub strokes: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: usize,
    #[arg(long, value_parser = band, default_value = "0.85:0.98")]
    pub band: Band,
    #[arg(long, value_enum, default_value_t = Refine::Naive)]
    pub refine: Refine,
    #[arg(long, value_enum, default_value_t = Layout::Multiply)]
    pub mode: Layout,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Eigenfunctions used by the toy classifier.
    #[arg(long, default_value_t = 2)]
    pub eigvecs: usize,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Scatter CSV: x, y, truth, both fields.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "400,900,1600,2500,3600,15000,30000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub eigvecs: usize,
    /// Skip the dense-graph solver.
    #[arg(long)]
    pub no_exact: bool,
    /// CSV path; defaults to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen port; falls back to SL_PORT, then 8742.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}
