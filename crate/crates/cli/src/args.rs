use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sparse reduced-rank regression: simulate, fit, predict, benchmark and
/// infer lagged influence networks.
///
/// Every command accepts `--config FILE.json`; flags given on the command
/// line override values from that file. Output files go to `--out`, else the
/// config's `output_dir`, else `$SEED_OUTPUT_DIR`, else the current directory.
#[derive(Debug, Parser)]
#[command(name = "seed", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic data set and write it with its ground truth.
    Simulate(SimulateArgs),
    /// Fit a model to X.csv and Y.csv; writes model.json and C_hat.csv.
    Fit(FitArgs),
    /// Apply a fitted model to new predictors; writes Yhat.csv.
    Predict(PredictArgs),
    /// Replicated simulation study; writes summary.csv and per-replication detail.
    Benchmark(BenchmarkArgs),
    /// Fit a lagged linear model to a multivariate series and score node-to-node influence.
    InferNetwork(InferArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Sparse low-rank regression (X, Y, true coefficient).
    Regression,
    /// Planted sparse vector autoregression (series and reference graph).
    Network,
}

#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    /// Training observations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Predictors.
    #[arg(long)]
    pub p: Option<usize>,
    /// Responses.
    #[arg(long)]
    pub q: Option<usize>,
    /// True rank of the planted coefficient (or of the lag structure for networks).
    #[arg(long)]
    pub rank: Option<usize>,
    /// AR(1) correlation of the predictors.
    #[arg(long)]
    pub rho_x: Option<f64>,
    /// AR(1) correlation of the noise.
    #[arg(long)]
    pub rho_e: Option<f64>,
    /// Noise level.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fraction of nonzero cells in the raw sparse block.
    #[arg(long)]
    pub density: Option<f64>,
    /// Planted singular values, comma separated; one per rank.
    #[arg(long, value_delimiter = ',')]
    pub singular_values: Option<Vec<f64>>,
    /// Make the planted left vectors orthogonal in the design metric.
    #[arg(long)]
    pub orthogonalize: bool,
    /// Master random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct NetworkSimFlags {
    /// Nodes of the simulated network.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Lag order.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Length of the simulated series.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Nodes whose past drives the others.
    #[arg(long)]
    pub drivers: Option<usize>,
    /// Total spectral norm of the lag matrices.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Innovation standard deviation.
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ridge,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    MaxAbs,
    Rms,
    Absolute,
}

#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// Sparse eigensolver.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Ridge added to XᵀX (ridge variant).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Keep this many predictors in each left vector.
    #[arg(long, conflicts_with = "u_threshold")]
    pub cardinality: Option<usize>,
    /// Drop left-vector entries below this relative threshold instead.
    #[arg(long)]
    pub u_threshold: Option<f64>,
    /// What --u-threshold is relative to.
    #[arg(long, value_enum, requires = "u_threshold")]
    pub threshold_scale: Option<ScaleArg>,
    /// Relative threshold on each right vector.
    #[arg(long)]
    pub v_threshold: Option<f64>,
    /// Stop extracting when the eigenvalue falls below this level.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Treat --mu as an absolute level instead of relative to ‖Y‖²/(nq).
    #[arg(long)]
    pub mu_absolute: bool,
    /// Maximum number of factors.
    #[arg(long)]
    pub rank_max: Option<usize>,
    /// Skip the least-squares refit after each factor.
    #[arg(long)]
    pub no_refit: bool,
    /// Keep every extracted factor instead of choosing the rank by information criterion.
    #[arg(long)]
    pub no_select_rank: bool,
    /// Iteration cap of the sparse eigensolver.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Convergence tolerance of the sparse eigensolver.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "regression")]
    pub kind: SimKind,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub network: NetworkSimFlags,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Predictor matrix, one observation per row.
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    /// Response matrix with the same rows as X.
    #[arg(long, value_name = "CSV")]
    pub y: PathBuf,
    /// True coefficient; when given the estimation error is reported.
    #[arg(long, value_name = "CSV")]
    pub truth: Option<PathBuf>,
    /// Tune left and right thresholds by K-fold cross-validation and apply
    /// them to the fitted factors.
    #[arg(long, value_name = "K")]
    pub cv_folds: Option<usize>,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// model.json written by `fit` or `infer-network`.
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    /// New predictors.
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "Yhat.csv")]
    pub output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Mu,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    /// detail.csv
    Csv,
    /// detail.jsonl
    JsonLines,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Number of replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also score an unpenalized reduced-rank fit on the same data.
    #[arg(long)]
    pub baseline: bool,
    /// Sweep the termination level or the sparsity threshold instead.
    #[arg(long, value_enum)]
    pub sweep: Option<SweepArg>,
    /// Sweep grid, comma separated.
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    pub grid: Option<Vec<f64>>,
    /// Per-replication detail format.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    /// Time series, one time point per row and one node per column.
    #[arg(long, value_name = "CSV")]
    pub series: PathBuf,
    /// Lag order.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Scale every node to unit variance before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Reference adjacency (row = target, column = source); the AUC is printed.
    #[arg(long, value_name = "CSV")]
    pub reference: Option<PathBuf>,
    /// Mark scores above this value as edges.
    #[arg(long)]
    pub edge_threshold: Option<f64>,
    #[command(flatten)]
    pub model: ModelFlags,
}
