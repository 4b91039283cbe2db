use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distemb::factorizations::Activation;
use distemb::gradcheck::Tensor;
use distemb::trainer::{FreezeMode, InitMode, TrainConfig};
use distemb::Method;

#[derive(Debug, Parser)]
#[command(
    name = "distemb",
    version,
    about = "Embedding compression with funneling factorization and distillation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one compressor to an embedding and write the factorized container.
    Decompose(DecomposeArgs),
    /// Score factorized containers against the original embedding.
    Eval(EvalArgs),
    /// Run pre-training, reconstruction fitting and distillation fine-tuning on the toy model.
    Pipeline(PipelineArgs),
    /// Fit several compressors at a matched parameter budget and tabulate them.
    Compare(CompareArgs),
    /// Finite-difference audit of the analytic gradients.
    Gradcheck(GradcheckArgs),
}

/// `VOCABxDIM`, e.g. `32000x512`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub vocab: usize,
    pub dim: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected VOCABxDIM such as 32000x512, got {s:?}");
        let (v, d) = s.split_once(['x', 'X', ',']).ok_or_else(bad)?;
        let vocab: usize = v.trim().parse().map_err(|_| bad())?;
        let dim: usize = d.trim().parse().map_err(|_| bad())?;
        if vocab == 0 || dim == 0 {
            return Err(bad());
        }
        Ok(Shape { vocab, dim })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Optimizer steps for every trained stage.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Final learning rate as a fraction of --lr (linear decay); 1 keeps it constant.
    #[arg(long, default_value_t = 1.0)]
    pub final_lr_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            learning_rate: self.lr,
            final_lr_fraction: self.final_lr_fraction,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Knobs of every compressor. Only those relevant to the chosen method are used.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Rank r of svd / funneling, and the per-group rank of groupfunneling.
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    /// Activation of the factorization (funneling defaults to relu).
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Initialization before reconstruction training: svd or random.
    #[arg(long, default_value = "svd")]
    pub init: InitMode,
    /// GroupReduce cluster count c.
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// GroupReduce minimum rank (defaults to --rank).
    #[arg(long)]
    pub r_min: Option<usize>,
    /// GroupReduce maximum rank (defaults to --r-min).
    #[arg(long)]
    pub r_max: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub refine_iters: usize,
    /// Product quantization subvector length.
    #[arg(long, default_value_t = 32)]
    pub group_size: usize,
    /// Product quantization codebook size K.
    #[arg(long, default_value_t = 2048)]
    pub n_clusters: usize,
    /// Tensor-train vocabulary factorization, e.g. 25,32,40 (automatic when omitted).
    #[arg(long, value_delimiter = ',')]
    pub vocab_shape: Vec<usize>,
    /// Tensor-train dimension factorization, e.g. 8,8,8 (automatic when omitted).
    #[arg(long, value_delimiter = ',')]
    pub dim_shape: Vec<usize>,
    #[arg(long, default_value_t = 90)]
    pub tt_rank: usize,
    /// TSV of `token<TAB>count` used as GroupReduce weights.
    #[arg(long)]
    pub freqs: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Embedding text file: a "VOCAB DIM" header, then one "token v1 ... vd" line per word.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Seeded Gaussian embedding of shape VOCABxDIM instead of a file.
    #[arg(long)]
    pub synthetic: Option<Shape>,
    /// Seed of the synthetic embedding.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub method: Method,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Factorized container to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Single-method JSON report to write.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print parameter accounting without fitting.
    #[arg(long)]
    pub accounting_only: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Original embedding text file.
    #[arg(long)]
    pub input: PathBuf,
    /// Factorized container(s) to score; repeat to compare several.
    #[arg(long, required = true)]
    pub container: Vec<PathBuf>,
    /// Corpus JSON whose examples are scored for held-out cross-entropy.
    #[arg(long, requires = "mixing")]
    pub corpus: Option<PathBuf>,
    /// Mixing matrix W of the toy model, in embedding text format.
    #[arg(long, requires = "corpus")]
    pub mixing: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Vocabulary size of the generated corpus.
    #[arg(long, default_value_t = 64)]
    pub vocab: usize,
    /// Number of generated examples.
    #[arg(long, default_value_t = 10_000)]
    pub examples: usize,
    #[arg(long, default_value_t = 4)]
    pub context: usize,
    /// Zipf exponent of the word-frequency prior.
    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArmName {
    RandomInit,
    NoDistill,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Corpus JSON; a planted synthetic corpus is generated when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Embedding dimension d of the toy model.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    #[arg(long, default_value = "relu")]
    pub activation: Activation,
    /// Mixing weight of the reconstruction loss; repeat for paired Step-3 runs.
    #[arg(long)]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Override --steps for Step 1.
    #[arg(long)]
    pub pretrain_steps: Option<usize>,
    /// Override --steps for Step 2.
    #[arg(long)]
    pub recon_steps: Option<usize>,
    /// Override --steps for Step 3.
    #[arg(long)]
    pub finetune_steps: Option<usize>,
    /// Step-2 initialization of the main run.
    #[arg(long, default_value = "svd")]
    pub init: InitMode,
    #[arg(long, default_value_t = 0.2)]
    pub heldout_fraction: f64,
    /// Add a Step-3 arm with the given tensors frozen: emb (embedding frozen) or non-emb.
    #[arg(long)]
    pub freeze: Vec<FreezeMode>,
    /// Add an ablation arm.
    #[arg(long, value_enum)]
    pub arm: Vec<ArmName>,
    /// Run every ablation arm.
    #[arg(long)]
    pub all_arms: bool,
    /// JSON report array to write.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Step-3 loss curve CSV to write.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Directory for the teacher, mixing matrix, held-out corpus and containers.
    #[arg(long)]
    pub save_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Methods to compare, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<Method>,
    /// Embedding text file; with neither this nor --synthetic a toy model is pre-trained.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<Shape>,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Toy-model dimension when pre-training.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Target embedding parameter count (defaults to rank·(vocab + dim)).
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub accounting_only: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Coordinates checked per tensor (sampled when a tensor is larger).
    #[arg(long, default_value_t = 400)]
    pub max_coords: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Debug hook: negate one analytic gradient (dU, dV or dW) before checking.
    #[arg(long, hide = true)]
    pub flip_sign: Option<Tensor>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}
