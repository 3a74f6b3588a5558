use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "swr", version, about = "Multi-scenario CTR benchmark")]
pub struct Cli {
    /// Run seed (default 42)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parallel runs for bench and sweep
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum)]
    pub precision: Option<Precision>,
    /// Only warnings and errors on stderr
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest raw files under a manifest into a processed dataset
    Prepare(PrepareArgs),
    /// Scenario statistics of a processed dataset or a count vector
    Analyze(AnalyzeArgs),
    /// Generate a synthetic multi-scenario dataset
    Synth(SynthArgs),
    /// Train one configuration into a run directory
    Train(TrainArgs),
    /// Re-evaluate a run's best checkpoint on its test split
    Evaluate(EvaluateArgs),
    /// Models x seeds with mean/std, best flags and Welch tests
    Bench(BenchArgs),
    /// Retrain on the top-k scenarios for several k
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Manifest file, or the name of a bundled one (movielens, kuairand, aliccp, amazon, douban, mind)
    #[arg(long)]
    pub manifest: String,
    /// Raw data directory (relative paths also tried under SWR_DATA_DIR)
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only the k largest scenarios
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value_t = swr::training::DEFAULT_SEED)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Processed dataset directory
    #[arg(long, conflicts_with = "counts")]
    pub data: Option<PathBuf>,
    /// Per-scenario interaction counts, comma separated
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<f64>>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthSpecArgs {
    /// Scenario count of generated data
    #[arg(long, default_value_t = 3)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 100_000)]
    pub rows: usize,
    /// Scenario s gets weight ratio^s (uniform when absent)
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Base click rate of every scenario
    #[arg(long, default_value_t = 0.3)]
    pub ctr: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub spec: SynthSpecArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run config (JSON)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Processed dataset directory (relative paths also tried under SWR_DATA_DIR)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use generated data instead of --data
    #[arg(long, conflicts_with = "data")]
    pub synthetic: bool,
    #[command(flatten)]
    pub synth: SynthSpecArgs,
    #[arg(long, default_value_t = swr::training::DEFAULT_SEED)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model kinds, comma separated, or "all"
    #[arg(long, default_value = "all")]
    pub models: String,
    /// Seeds per model, counting up from --seed
    #[arg(long, default_value_t = crate::bench::DEFAULT_SEED_COUNT)]
    pub seeds: usize,
    /// Keep only the k largest scenarios
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Tower widths, comma separated
    #[arg(long, value_delimiter = ',')]
    pub towers: Option<Vec<usize>>,
    #[command(flatten)]
    pub train: TrainOverrides,
    /// Also time training and inference per model
    #[arg(long)]
    pub profile: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Scenario counts to keep, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4, 5, 6, 7])]
    pub k: Vec<usize>,
    #[arg(long, default_value = "all")]
    pub models: String,
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Scenario ranks reported side by side (0 = largest)
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 2])]
    pub track: Vec<usize>,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub out: PathBuf,
}
