use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrsnmf::init::InitKind;
use lrsnmf::io::Layout;

/// Sparse, low-rank NMF for hyperspectral unmixing: estimates the number
/// of endmembers, their spectra and their abundances in one run.
///
/// Exit status: 0 on success, 2 on invalid flags or inputs, 1 on runtime
/// failures (I/O, numerical breakdown).
#[derive(Parser, Debug)]
#[command(name = "lrsnmf", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene Y = ΦWᵀ + E with known ground truth.
    Synth(SynthArgs),
    /// Estimate endmembers and abundances from an observation matrix.
    Unmix(UnmixArgs),
    /// Score estimated endmembers (and abundances) against a reference.
    Eval(EvalArgs),
    /// Run synth → unmix → eval over several seeds and aggregate.
    ReproSim(ReproArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceArg {
    /// Spectra drawn from a library (the built-in one unless --library).
    Library,
    /// Smooth random curves (sums of Gaussian bumps).
    SyntheticSmooth,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitArg {
    /// Entries i.i.d. uniform on [0, 1).
    Uniform,
    /// Vertex component analysis endmembers, NNLS abundances.
    Vca,
}

impl From<InitArg> for InitKind {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Uniform => InitKind::UniformRandom,
            InitArg::Vca => InitKind::Vca,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutArg {
    /// One row per band, one column per pixel.
    BandsByPixels,
    /// One row per pixel.
    PixelsByBands,
}

impl From<LayoutArg> for Layout {
    fn from(a: LayoutArg) -> Self {
        match a {
            LayoutArg::BandsByPixels => Layout::BandsByPixels,
            LayoutArg::PixelsByBands => Layout::PixelsByBands,
        }
    }
}

/// Scene parameters shared by `synth` and `repro-sim`.
#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    /// Number of spectral bands L.
    #[arg(long = "L", value_name = "BANDS", default_value_t = 224)]
    pub bands: usize,
    /// Number of pixels K.
    #[arg(long = "K", value_name = "PIXELS", default_value_t = 500)]
    pub pixels: usize,
    /// Number of true endmembers N.
    #[arg(long = "N", value_name = "ENDMEMBERS", default_value_t = 4)]
    pub endmembers: usize,
    /// Fraction of abundance entries kept nonzero, in (0, 1].
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 1e-3)]
    pub sigma: f64,
    /// Keep negative entries produced by noise instead of clamping at zero.
    #[arg(long)]
    pub allow_negative: bool,
    /// Where endmember spectra come from.
    #[arg(long, value_enum, default_value_t = SourceArg::Library)]
    pub source: SourceArg,
    /// Library CSV, one spectrum per row [default: built-in 16-spectrum,
    /// 224-band library].
    #[arg(long, value_name = "CSV")]
    pub library: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Seed for endmember selection, abundances and noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Image height; with --width, recorded so that unmix can write maps.
    #[arg(long, requires = "width")]
    pub height: Option<usize>,
    /// Image width; height × width must equal K.
    #[arg(long, requires = "height")]
    pub width: Option<usize>,
    /// Output directory (observations.csv, endmembers_true.csv,
    /// abundances_true.csv, truth.toml).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Matrix file options.
#[derive(Args, Debug, Clone, Default)]
pub struct FormatArgs {
    /// On-disk orientation of the input matrix [default: bands-by-pixels].
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Field delimiter [default: ,].
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Skip the first non-comment line as a header [default: off].
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Debug)]
pub struct UnmixArgs {
    /// Observation matrix CSV (required unless taken from --from-report).
    #[arg(long, value_name = "CSV")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArgs,
    /// Accept negative entries in the input [default: off].
    #[arg(long)]
    pub allow_negative: bool,
    /// Rerun with the resolved settings stored in a previous report; any
    /// flag given explicitly overrides the stored value.
    #[arg(long, value_name = "TOML")]
    pub from_report: Option<PathBuf>,
    /// Overestimated rank r [default: 10].
    #[arg(long)]
    pub r: Option<usize>,
    /// Initialization [default: uniform].
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Seed of the initialization [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Low-rank weight δ [default: 5e-4·‖Y‖₂^1.5].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Sparsity weight λ1 [default: 5e-4·‖Y‖₂^1.5/√K].
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Smoothing constant η [default: 1e-2 · mean pixel norm].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Maximum outer iterations; 0 returns the initialization [default: 500].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop when the relative cost change falls below this [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Column-pair energy, relative to the largest, below which a column is
    /// pruned [default: 1e-4].
    #[arg(long)]
    pub prune_tol: Option<f64>,
    /// First step tried by the line search, in (0, 1] [default: 1].
    #[arg(long)]
    pub beta_init: Option<f64>,
    /// Backtracking factor, in (0, 1) [default: 0.5].
    #[arg(long)]
    pub shrink: Option<f64>,
    /// Maximum line-search trials per block [default: 20].
    #[arg(long)]
    pub max_backtracks: Option<usize>,
    /// Image height for abundance maps (with --width; height × width = K).
    #[arg(long)]
    pub height: Option<usize>,
    /// Image width for abundance maps.
    #[arg(long)]
    pub width: Option<usize>,
    /// Output directory (endmembers.csv, abundances.csv, report.toml,
    /// abundance_map_NN.pgm).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Estimated endmembers, L×N_est, bands-by-pixels.
    #[arg(long, value_name = "CSV")]
    pub estimated: PathBuf,
    /// Reference endmembers, L×N_ref, bands-by-pixels.
    #[arg(long, value_name = "CSV")]
    pub reference: PathBuf,
    /// Estimated abundances, K×N_est, one row per pixel (optional).
    #[arg(long, value_name = "CSV", requires = "reference_abundances")]
    pub estimated_abundances: Option<PathBuf>,
    /// Reference abundances, K×N_ref, one row per pixel (optional).
    #[arg(long, value_name = "CSV", requires = "estimated_abundances")]
    pub reference_abundances: Option<PathBuf>,
    /// Report file [default: eval.toml next to --estimated].
    #[arg(long, value_name = "TOML")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReproArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 10)]
    pub n_seeds: u64,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overestimated rank r.
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    /// Initialization.
    #[arg(long, value_enum, default_value_t = InitArg::Uniform)]
    pub init: InitArg,
    /// Seeds run concurrently [default: available cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory: one seed_NNNN/ folder per seed plus summary.toml.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}
