use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use proje_core::{Split, Task, Variant};

#[derive(Debug, Parser)]
#[command(
    name = "proje",
    version,
    about = "Train, evaluate, and query embedding-projection models for knowledge graph completion",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint
    Train(TrainCmd),
    /// Evaluate a checkpoint on one split
    Eval(EvalCmd),
    /// Print the top completions of a single query
    Predict(PredictCmd),
    /// Train and evaluate one model per negative-sampling rate
    Sweep(SweepCmd),
    /// Write the synthetic block-structured graph as TSV files
    Synth(SynthCmd),
}

/// Where the triples and (optionally) a fixed vocabulary come from.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training triples (head<TAB>relation<TAB>tail)
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub valid: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub test: Option<PathBuf>,
    /// Entity dump (name<TAB>id) fixing the ID assignment; needs --relations
    #[arg(long, value_name = "PATH", requires = "relations")]
    pub entities: Option<PathBuf>,
    /// Relation dump (name<TAB>id); needs --entities
    #[arg(long, value_name = "PATH", requires = "entities")]
    pub relations: Option<PathBuf>,
}

/// Model and optimizer settings. Unset values take the per-task defaults.
#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value = "entity")]
    pub task: Task,
    #[arg(long, default_value = "wlistwise")]
    pub variant: Variant,
    /// Embedding dimension [default: 200 entity, 100 relation]
    #[arg(long)]
    pub k: Option<usize>,
    /// Adam learning rate [default: 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Instances per batch [default: 200]
    #[arg(long)]
    pub batch: Option<usize>,
    /// L1 weight [default: 1e-5]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dropout probability on the combined vector [default: 0.5]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Probability of keeping each negative candidate [default: 0.5 entity, 0.75 relation]
    #[arg(long)]
    pub py: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Checkpoint output path
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-epoch curve CSV
    #[arg(long, value_name = "PATH")]
    pub curve: Option<PathBuf>,
    /// Evaluate on this split after every epoch (adds metric columns to the curve)
    #[arg(long, value_name = "SPLIT")]
    pub validate: Option<Split>,
    /// Only evaluate the first N triples of the validation split
    #[arg(long, value_name = "N", requires = "validate")]
    pub validate_limit: Option<usize>,
    /// Directory to write entities.tsv and relations.tsv into
    #[arg(long, value_name = "DIR")]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// HITS cutoff [default: 10 entity, 1 relation]
    #[arg(long)]
    pub hits_k: Option<usize>,
    /// Also write the CSV row to this file
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "NAME")]
    pub head: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub relation: Option<String>,
    #[arg(long, value_name = "NAME")]
    pub tail: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Skip completions already known to be true in any loaded split
    #[arg(long)]
    pub filter: bool,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// HITS cutoff [default: 10 entity, 1 relation]
    #[arg(long)]
    pub hits_k: Option<usize>,
    /// Comma-separated sampling rates [default: 0.05,0.25,0.5,0.75,0.95]
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    /// Sweep CSV output path (stdout if absent)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Run the trainings concurrently
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// Output directory for train.tsv and test.tsv
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Seed of the train/test split
    #[arg(long, default_value_t = 2017)]
    pub seed: u64,
}
