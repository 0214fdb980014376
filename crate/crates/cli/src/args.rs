use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "capnet", version, about = "Norm-based capacity bounds for feedforward networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every bound formula on a network and dataset.
    Report(ReportArgs),
    /// Replace one layer by its leading singular triple and certify the error.
    Compress(CompressArgs),
    /// Monte Carlo Rademacher estimate for the norm ball around a network.
    Rademacher(RademacherArgs),
    /// Exact lower-bound constructions against the lower-bound formula.
    Lowerbound(LowerboundArgs),
    /// Bounds across depths for a family with pinned norm products.
    Sweep(SweepArgs),
    /// Run property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    #[value(alias = "structured")]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Schatten exponent; `inf` selects the spectral norm.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Recorded in the header; the report itself is deterministic.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Upper cap on the Γ used by the depth-independent bounds.
    #[arg(long = "gamma-cap")]
    pub gamma_cap: Option<f64>,
    #[arg(long = "override-Gamma")]
    pub override_gamma: Option<f64>,
    #[arg(long = "override-M")]
    pub override_m: Option<f64>,
    /// Replaces the data radius B.
    #[arg(long = "override-B")]
    pub override_b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Dataset whose radius is used as B when `--override-B` is absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Sampled inputs used to check the certificate.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Path of the compressed network; the certificate goes to `<out>.cert.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "override-Gamma")]
    pub override_gamma: Option<f64>,
    #[arg(long = "override-M")]
    pub override_m: Option<f64>,
    #[arg(long = "override-B")]
    pub override_b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BallNorm {
    /// Schatten-p ball (Frobenius at p = 2).
    Schatten,
    /// Largest row ℓ1 norm.
    RowsL1Max,
    /// Sum of row Euclidean norms.
    RowsL2Sum,
}

#[derive(Debug, Args)]
pub struct RademacherArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = BallNorm::Schatten)]
    pub norm: BallNorm,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = capnet::rademacher::DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = capnet::rademacher::DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    /// Comma-separated widths.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub h: Vec<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub m: Vec<usize>,
    /// Comma-separated Schatten exponents (`inf` allowed).
    #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
    pub p: Vec<f64>,
    /// Monte Carlo draws when m exceeds the enumeration cap.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    /// One unit vector layer followed by unit scalar layers.
    Chain,
    /// Gaussian layers rescaled to unit Frobenius norm.
    Random,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Depths as a comma list; `a-b` expands to a range.
    #[arg(long, default_value = "2-64")]
    pub depths: String,
    #[arg(long, value_enum, default_value_t = Policy::Chain)]
    pub policy: Policy,
    /// Number of sample points.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Hidden width for the random policy.
    #[arg(long, default_value_t = 4)]
    pub width: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Monte Carlo sign draws per depth; 0 skips the estimate.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Norms,
    Contraction,
    Union,
    Cover,
    Certificate,
    Lowerbound,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
