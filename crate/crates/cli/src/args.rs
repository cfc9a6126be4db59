use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "irn",
    version,
    about = "Interpretable hop-by-hop question answering over a knowledge base"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic people-centred KB as TSV.
    SynthKb(SynthKbArgs),
    /// Generate templated questions from KB paths.
    GenData(GenDataArgs),
    /// Train a model and evaluate it on a held-out split.
    Train(TrainArgs),
    /// Score a trained model on a JSONL dataset.
    Eval(EvalArgs),
    /// Answer a single question.
    Answer(AnswerArgs),
    /// Print the hop-by-hop reasoning for a question.
    Trace(TraceArgs),
    /// Accuracy with gold relations forced at every content hop.
    OverrideEval(OverrideEvalArgs),
    /// Vocabulary words closest to a relation in question space.
    RelWords(RelWordsArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthKbArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6500)]
    pub people: usize,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub kb: PathBuf,
    /// 2, 3 or conj
    #[arg(long)]
    pub hops: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Maximum number of questions.
    #[arg(long)]
    pub max: Option<usize>,
    /// Phrasings generated per extracted path.
    #[arg(long, default_value_t = 3)]
    pub per_path: usize,
    /// Template file (defaults to the built-in set).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Where to write the inverse-closed KB for conjunctive data
    /// (default: `<out>.kb.tsv`).
    #[arg(long)]
    pub kb_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigFlags {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigFlags,
    /// standard, incomplete or unseen
    #[arg(long, default_value = "standard")]
    pub experiment: String,
    /// Per-round history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Evaluation report JSON for the held-out test split.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the test split as JSONL.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub per_hop: bool,
    /// KB for branch-tolerant per-hop scoring and for repeats.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Retrain this many times with consecutive seeds (needs `--kb` and
    /// `--train-data`) and report the mean accuracy.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// Write per-instance predictions as JSON.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuestionArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub question: String,
    #[arg(long = "subject", required = true)]
    pub subjects: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub hop_cap: usize,
    /// Decode exactly this many hops instead of halting on `Terminal`.
    #[arg(long)]
    pub hops: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    #[command(flatten)]
    pub q: QuestionArgs,
    /// Print the prediction as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub q: QuestionArgs,
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverrideEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelWordsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub relation: String,
    #[arg(short = 'k', long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
}
