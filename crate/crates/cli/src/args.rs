use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "seedscope",
    version,
    about = "Compare seed-to-seed variability of binary classifiers through trimmed KS tests on logit gaps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Robust two-sample test of one candidate against a reference pool at a single trimming level.
    Ks(KsArgs),
    /// Bootstrap estimate of the smallest accepted trimming level.
    Alpha(AlphaArgs),
    /// Ensemble-size sweep over the candidate half of a pool.
    Sweep(SweepArgs),
    /// Accuracy, churn and ECE for every model of a pool.
    Metrics(MetricsArgs),
    /// Generate a synthetic pool.
    Synth(SynthArgs),
    /// Closed-form DKW thresholds and probability bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PoolArgs {
    /// Pool file (.csv in long or wide form, or .jsonl).
    #[arg(long)]
    pub pool: PathBuf,
    /// Labels file for JSONL pools (default: labels.json next to the pool).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Gaps are clipped to [-s_max, s_max] after loading.
    #[arg(long, default_value_t = 25.0)]
    pub s_max: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ReferenceArgs {
    /// Comma-separated reference model ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "reference_file")]
    pub reference_ids: Option<Vec<String>>,
    /// File with one reference model id per line ('#' starts a comment).
    #[arg(long)]
    pub reference_file: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitArg {
    Bootstrap,
    Disjoint,
    Shared,
}

#[derive(Args, Debug, Clone)]
pub struct AlphaOpts {
    /// False-alarm probability for the DKW threshold.
    #[arg(long, default_value_t = 0.01)]
    pub eps_a: f64,
    /// Trimming levels: comma list (0,0.01,0.05) or inclusive range start:stop:step.
    #[arg(long, default_value = "0:0.25:0.005")]
    pub alpha_grid: String,
    /// Number of bootstrap replicates.
    #[arg(long = "bootstrap", default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SplitArg::Bootstrap)]
    pub split: SplitArg,
    /// Per-side resample size in bootstrap mode (default: number of test points).
    #[arg(long)]
    pub resample_size: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct KsArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[arg(long)]
    pub candidate: String,
    #[arg(long, default_value_t = 0.01)]
    pub eps_a: f64,
    /// Trimming level of the test.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::Disjoint)]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub resample_size: Option<usize>,
    #[arg(long)]
    pub allow_candidate_in_reference: bool,
    /// Directory for result.json, envelope.csv and reference.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    Single,
    Pairwise,
    LeaveOneOut,
}

#[derive(Args, Debug)]
pub struct AlphaArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    #[command(flatten)]
    pub reference: ReferenceArgs,
    #[arg(long, value_enum, default_value_t = AlphaMode::Single)]
    pub mode: AlphaMode,
    /// Candidate model id (single mode).
    #[arg(long)]
    pub candidate: Option<String>,
    /// Models compared in pairwise and leave-one-out modes (default: all).
    #[arg(long, value_delimiter = ',')]
    pub ids: Option<Vec<String>>,
    #[command(flatten)]
    pub opts: AlphaOpts,
    #[arg(long)]
    pub allow_candidate_in_reference: bool,
    /// Directory for alpha.json and a CSV table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingArg {
    WithoutReplacement,
    WithReplacement,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Pool file; when absent a synthetic pool is generated from --preset.
    #[arg(long, conflicts_with = "preset")]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 25.0)]
    pub s_max: f64,
    /// Synthetic preset used when no pool is given.
    #[arg(long, default_value = "cnn-analogue")]
    pub preset: String,
    /// Seed of the synthetic pool.
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,30")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = SamplingArg::WithoutReplacement)]
    pub member_sampling: SamplingArg,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    /// α̂ cut for the summary percentage column.
    #[arg(long, default_value_t = 0.05)]
    pub alpha_cut: f64,
    #[command(flatten)]
    pub opts: AlphaOpts,
    /// Directory for summary.json, sweep.csv (tidy) and records.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub pool: PoolArgs,
    /// Ensemble members for the churn-vs-ensemble column (default: all models).
    #[arg(long, value_delimiter = ',')]
    pub ensemble_ids: Option<Vec<String>>,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    /// Directory for metrics.json and metrics.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyArg {
    GaussianMixture,
    LogisticTeacher,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Start from a named preset (cnn-analogue, small).
    #[arg(long, default_value = "small")]
    pub preset: String,
    #[arg(long)]
    pub n_models: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub margin_mean: Option<f64>,
    #[arg(long)]
    pub latent_sd: Option<f64>,
    #[arg(long)]
    pub shift_jitter: Option<f64>,
    #[arg(long)]
    pub scale_jitter: Option<f64>,
    #[arg(long)]
    pub idiosyncratic_sd: Option<f64>,
    #[arg(long)]
    pub label_noise: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Output directory (pool.csv or pool.jsonl + labels.json, plus pool_manifest.json).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[group(id = "bound_kind", required = true, multiple = false)]
pub struct BoundKind {
    /// delta_a = sqrt(ln(C/eps)/N); needs -N and --eps.
    #[arg(long, group = "bound_kind")]
    pub two_sample: bool,
    /// DKW radius sqrt(ln(2/eps)/(2N)); needs -N and --eps.
    #[arg(long, group = "bound_kind")]
    pub one_sample: bool,
    /// Union bound 2M exp(-2N delta_b^2); needs -M, -N, --delta-b.
    #[arg(long, group = "bound_kind")]
    pub union_bound: bool,
    /// Lower bound on the probability of the combined band; needs -M, -N, --delta-a, --delta-b.
    #[arg(long, group = "bound_kind")]
    pub band_coverage: bool,
    /// L1 contamination radius and its failure probability.
    #[arg(long, group = "bound_kind")]
    pub l1: bool,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub kind: BoundKind,
    /// Samples per model.
    #[arg(short = 'N', long = "n-samples")]
    pub n: Option<usize>,
    /// Number of reference models.
    #[arg(short = 'M', long = "n-models")]
    pub m: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta_a: Option<f64>,
    #[arg(long)]
    pub delta_b: Option<f64>,
    #[arg(long)]
    pub delta_c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Length of the gap support (default 2 * 25).
    #[arg(long, default_value_t = 50.0)]
    pub support_len: f64,
}
