use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tailbreak_core::limitsim::{DEFAULT_DELTA, DEFAULT_G_TRIM, REFERENCE_PATHS, REFERENCE_SEED, REFERENCE_STEPS};

#[derive(Debug, Parser)]
#[command(name = "tailbreak", version, about = "Tail-risk estimation, intervals and change-point tests for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimate of a risk measure
    Estimate(EstimateArgs),
    /// Confidence interval by sectioning or self-normalization
    Ci(CiArgs),
    /// Test for a single change in a risk measure
    TestSingle(TestSingleArgs),
    /// Test for an unknown number of changes in a risk measure
    TestMultiple(TestMultipleArgs),
    /// Simulate and cache a critical-value table
    Critvals(CritvalsArgs),
    /// Generate a synthetic series
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment from a JSON config
    Experiment(ExperimentArgs),
    /// Intervals over rolling windows
    RollingBand(RollingBandArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    Var,
    Es,
    Ctm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    None,
    LogReturns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sectioning,
    Selfnorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalArg {
    Lobato,
    G,
    Htilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgpKind {
    Ar1,
    Arch1,
    DfChange,
    LambdaChange,
    ThreeRegime,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file holding the series
    #[arg(long)]
    pub input: PathBuf,
    /// value column, by header name or zero-based index
    #[arg(long, default_value = "0")]
    pub column: String,
    /// optional date-label column, by header name or zero-based index
    #[arg(long)]
    pub date_column: Option<String>,
    /// the first row holds data, not column names
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, value_enum, default_value_t = Transform::None)]
    pub transform: Transform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RiskArgs {
    /// probability level; lower-tail levels are complemented
    #[arg(long, default_value_t = 0.95)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = Tail::Upper)]
    pub tail: Tail,
    #[arg(long, value_enum, default_value_t = MeasureArg::Es)]
    pub measure: MeasureArg,
    /// exponent of the conditional tail moment
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Identifies a cached table by its key.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TableArgs {
    #[arg(long, default_value_t = REFERENCE_PATHS)]
    pub table_paths: usize,
    #[arg(long, default_value_t = REFERENCE_STEPS)]
    pub table_steps: usize,
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub table_seed: u64,
    /// directory of cached tables (default: $TAILBREAK_CACHE_DIR or .tailbreak-cache)
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub risk: RiskArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub risk: RiskArgs,
    #[arg(long, value_enum, default_value_t = Method::Selfnorm)]
    pub method: Method,
    /// number of sections
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// coverage level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestSingleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub risk: RiskArgs,
    /// significance level
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// trim fraction of the candidate range and of the reference table
    #[arg(long, default_value_t = DEFAULT_G_TRIM)]
    pub trim: f64,
    /// shortest outer segment (default: max(i_min, 8))
    #[arg(long)]
    pub n_min: Option<usize>,
    /// shortest inner segment (default: ceil(1/(1-p)) + 1)
    #[arg(long)]
    pub i_min: Option<usize>,
    /// include per-candidate traces
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestMultipleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub risk: RiskArgs,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// minimum segment fraction and coarse-grid spacing
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long)]
    pub i_min: Option<usize>,
    #[arg(long)]
    pub trace: bool,
    #[command(flatten)]
    pub table: TableArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CritvalsArgs {
    #[arg(long, value_enum)]
    pub functional: FunctionalArg,
    /// trim for g, delta for htilde (defaults: the library defaults)
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long, default_value_t = REFERENCE_PATHS)]
    pub paths: usize,
    #[arg(long, default_value_t = REFERENCE_STEPS)]
    pub steps: usize,
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub seed: u64,
    /// quantile levels to store (default: a standard set)
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<f64>,
    /// table file (default: the cache entry for the key)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: DgpKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    /// AR coefficient (ar1)
    #[arg(long, default_value_t = 0.5)]
    pub phi: f64,
    /// ARCH intercept (arch1)
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// ARCH coefficient (arch1), or its post-change value (lambda-change)
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    /// Student-t degrees of freedom of the changed regime
    #[arg(long, default_value_t = 3.0)]
    pub df: f64,
    /// add this location shift after the fraction `shift_at` of the sample
    #[arg(long, allow_negative_numbers = true)]
    pub shift: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub shift_at: f64,
    /// write the series as CSV instead of embedding it in the JSON output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExperimentArgs {
    /// JSON experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// CSV report; a JSON provenance sidecar is written next to it
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub table: TableArgs,
    /// trim of the g table
    #[arg(long, default_value_t = DEFAULT_G_TRIM)]
    pub trim: f64,
    /// delta of the htilde table
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RollingBandArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub risk: RiskArgs,
    #[arg(long)]
    pub window: usize,
    /// step between successive window starts
    #[arg(long)]
    pub shift: usize,
    #[arg(long, value_enum, default_value_t = Method::Selfnorm)]
    pub method: Method,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// CSV of the band rows
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub table: TableArgs,
}
