use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "forumrec", version, about = "Thread recommendation for course discussion forums")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic forum with known latent structure.
    Synth(SynthArgs),
    /// Validate raw posts and a course schedule into a dataset directory.
    Ingest(IngestArgs),
    /// Fit the topic model on training posts and course weeks.
    Lda(LdaArgs),
    /// Train the embedding model.
    Train(TrainArgs),
    /// Score a checkpoint or a baseline by MAP@N on a test window.
    Eval(EvalArgs),
    /// Train and score the full model and each single-component ablation.
    Ablate(AblateArgs),
    /// Rank threads for one student.
    Recommend(RecommendArgs),
    /// Search embedding size and decay rates on a held-out last training day.
    Grid(GridArgs),
    /// Check the artifacts listed in a run manifest against their checksums.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value = "algo-like")]
    pub preset: String,
    /// Multiplies the preset's student and thread counts.
    #[arg(long, default_value_t = 0.1)]
    pub scale: f64,
    /// TOML file whose keys override the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// JSON-lines posts.
    #[arg(long)]
    pub posts: PathBuf,
    /// Course schedule JSON.
    #[arg(long)]
    pub schedule: PathBuf,
    /// Stopword list replacing the built-in one.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where training ends: an explicit time, or the start of a course week.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainEndArgs {
    /// End of training, in the dataset's timestamp units.
    #[arg(long, conflicts_with = "train_weeks")]
    pub train_end: Option<f64>,
    /// Train on this many course weeks; defaults to all but the last.
    #[arg(long)]
    pub train_weeks: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LdaArgs {
    /// Dataset directory with posts.jsonl and schedule.json.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of topics; defaults to the number of course weeks.
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long, default_value_t = forumrec::text::DEFAULT_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = forumrec::text::DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// Fit course weeks with their own model instead of jointly with posts.
    #[arg(long)]
    pub separate_course_model: bool,
    #[command(flatten)]
    pub split: TrainEndArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training configuration: defaults, then `--config`, then each `--set`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainConfigArgs {
    /// Flat TOML file of training keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set epochs=10 --set no_text_features=true`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Base seed; the training seed is derived from it unless `seed` is set explicitly.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory of `lda`.
    #[arg(long)]
    pub topics: PathBuf,
    #[command(flatten)]
    pub train: TrainConfigArgs,
    /// Also write every embedding change of the final replay to trajectories.csv.
    #[arg(long)]
    pub export_trajectories: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    /// Cutoff N of MAP@N.
    #[arg(short = 'n', long = "cutoff", default_value_t = 5)]
    pub cutoff: usize,
    /// End of the test window; defaults to one window length after training ends.
    #[arg(long)]
    pub test_end: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub window_days: f64,
    /// Rank at every test post against that post's thread instead of once per student.
    #[arg(long)]
    pub per_event: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// pop, rec or user-rec.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Order recency baselines oldest first.
    #[arg(long)]
    pub rec_ascending: bool,
    /// Training end for baselines; checkpoints carry their own.
    #[command(flatten)]
    pub split: TrainEndArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    #[command(flatten)]
    pub train: TrainConfigArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Variants trained at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RecommendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// External student id.
    #[arg(long)]
    pub student: String,
    /// Ranking time; defaults to the end of training.
    #[arg(long)]
    pub at: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub topics: PathBuf,
    #[command(flatten)]
    pub train: TrainConfigArgs,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// A manifest.json, or a directory containing one.
    pub manifest: PathBuf,
}
