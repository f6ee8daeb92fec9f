use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "eyedas",
    version,
    about = "Tell 2D depictions from 3D objects in short frame sequences"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for augmentation, fold assignment, sampling and generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving reports and generated data.
    #[arg(long, global = true, default_value = "eyedas-out")]
    pub out_dir: PathBuf,
    /// JSON file overriding the `train` and `pipeline` defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the meta-classifier on a labeled dataset.
    Train(TrainArgs),
    /// Label object sequences with a stored model.
    Classify(ClassifyArgs),
    /// Run one evaluation experiment.
    Eval(EvalArgs),
    /// Attribute predictions to the experts and tabulate their disagreement.
    Explain(ExplainArgs),
    /// Write a synthetic labeled dataset.
    Generate(GenerateArgs),
    /// Time per-frame decisions of a stored model.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Candidate ensemble sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid_estimators: Option<Vec<usize>>,
    /// Candidate tree depths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid_depths: Option<Vec<usize>>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root with one directory per instance.
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write; defaults to `model.eyds` in the output directory.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["instance_dir", "stream"])))]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Instance directory to classify as a whole; repeatable.
    #[arg(long)]
    pub instance_dir: Vec<PathBuf>,
    /// Instance directory replayed frame by frame, one verdict per frame.
    #[arg(long)]
    pub stream: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Roc,
    Thresholds,
    Time,
    Size,
    Gating,
    Generalization,
    Ablation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    City,
    Class,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Training dataset (roc, thresholds, time, gating, ablation).
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// Test dataset (roc, thresholds, time, gating, ablation).
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Stored model used instead of training (roc, time, gating).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pooled dataset that the experiment splits itself (size, generalization).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training-set sizes for the size sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Tag axis for the generalization matrix.
    #[arg(long, value_enum, default_value = "city")]
    pub axis: Axis,
    /// Fewest 2D training instances a generalization split may have.
    #[arg(long)]
    pub floor_2d: Option<usize>,
    /// Fewest 3D training instances a generalization split may have.
    #[arg(long)]
    pub floor_3d: Option<usize>,
    /// JSON array of {"detector", "before_rate"} objects for the gating table.
    #[arg(long)]
    pub od_rates: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Instances to explain.
    #[arg(long)]
    pub data: PathBuf,
    /// Reference dataset for absent features; the model's training data.
    #[arg(long)]
    pub background: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n3d: usize,
    #[arg(long)]
    pub n2d: usize,
    /// Frame side in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    /// Frames per instance.
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose sequences are replayed.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Upper bound on the number of sequences used.
    #[arg(long, default_value_t = 20)]
    pub max_samples: usize,
}
