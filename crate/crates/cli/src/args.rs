use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsevine::bicop::Criterion;
use sparsevine::select::Method;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "sparsevine", version, about = "Sparse D-vine copula quantile regression")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed for simulation.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select variables and fit a D-vine regression model.
    Fit(FitArgs),
    /// Predict conditional quantiles with a fitted model.
    Predict(PredictArgs),
    /// Run the simulation benchmark or export one simulated dataset.
    Simulate(SimulateArgs),
    /// Preprocess and screen SNPs, then build grouped features.
    ExtractFeatures(ExtractArgs),
    /// Score quantile predictions against observed responses.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::Bic => Criterion::Bic,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// res, parcor or baseline.
    #[arg(long, default_value = "res")]
    pub method: Method,

    #[arg(long, value_enum, default_value = "aic")]
    pub criterion: CriterionArg,

    /// Quantile level of the pseudo-response used by the residual method.
    #[arg(long, default_value_t = 0.5)]
    pub pseudo_quantile: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,

    #[command(flatten)]
    pub selection: SelectionArgs,

    /// Model JSON destination (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Selection trace JSON destination.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    /// CSV containing every explanatory variable of the model.
    #[arg(long)]
    pub input: PathBuf,

    /// Comma-separated quantile levels, strictly increasing in (0, 1).
    #[arg(long, default_value = "0.05,0.5,0.95")]
    pub levels: String,

    /// Prediction CSV destination (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Data-generating process, 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub dgp: usize,

    #[arg(long, default_value_t = 1)]
    pub case: usize,

    #[arg(long, default_value_t = 20)]
    pub reps: usize,

    /// Comma-separated methods.
    #[arg(long = "method", alias = "methods", value_delimiter = ',', default_value = "res,parcor")]
    pub methods: Vec<Method>,

    #[arg(long, value_enum, default_value = "aic")]
    pub criterion: CriterionArg,

    #[arg(long, default_value_t = 0.5)]
    pub pseudo_quantile: f64,

    /// Benchmark CSV destination; without it the CSV goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Write train.csv, test.csv and labels.json of one simulated dataset here
    /// instead of running the benchmark.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Training SNP matrix: SVM1 binary or CSV (optional `id` column).
    #[arg(long)]
    pub input: PathBuf,

    /// CSV with the response for the training rows.
    #[arg(long)]
    pub phenotype: PathBuf,

    #[arg(long, default_value = "y")]
    pub response: String,

    /// SNP matrix of held-out rows, transformed with the training features.
    #[arg(long)]
    pub test_input: Option<PathBuf>,

    #[arg(long, requires = "test_input")]
    pub test_output: Option<PathBuf>,

    /// Feature CSV destination: response first, then one column per feature.
    #[arg(long)]
    pub output: PathBuf,

    /// Manifest JSON destination (default: output path with `.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    #[arg(long, default_value_t = 100)]
    pub grouping: usize,

    #[arg(long, default_value_t = 0.05)]
    pub freq_threshold: f64,

    #[arg(long, default_value_t = 0.10)]
    pub p_cut: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction CSV with `q<level>` columns.
    #[arg(long)]
    pub input: PathBuf,

    /// CSV holding the observed response.
    #[arg(long)]
    pub truth: PathBuf,

    #[arg(long, default_value = "y")]
    pub response: String,

    /// Variable labels JSON (as written by `simulate --export-dir`).
    #[arg(long, requires = "trace")]
    pub labels: Option<PathBuf>,

    /// Selection trace JSON written by `fit`.
    #[arg(long, requires = "labels")]
    pub trace: Option<PathBuf>,

    /// Metrics CSV destination (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
