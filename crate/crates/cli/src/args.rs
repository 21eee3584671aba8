use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kleval::cluster::{Algorithm, ClusterConfig, HacStop};
use kleval::matcher::{MatcherConfig, MatcherKind, WordNetOptions, WordNetScope};
use kleval::scorer::SmoothingConfig;

#[derive(Parser, Debug)]
#[command(name = "kleval", version, about = "Cluster-based KL evaluation of multi-answer QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score model predictions against gold answers.
    Eval(EvalArgs),
    /// Correlate automatic pipelines with gold KL under sampled predictions.
    Validate(ValidateArgs),
    /// Evaluate the sample-size tail bound.
    Bound(BoundArgs),
    /// Cluster gold answers and write the clusterings as JSON Lines.
    Cluster(ClusterArgs),
    /// Write a synthetic corpus with planted clusters.
    Synth(SynthArgs),
}

/// Input files. Anything not given explicitly is looked up by its default
/// name inside the data directory.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Directory holding gold.jsonl, predictions.jsonl, human_clusters.jsonl
    /// and vectors.txt.
    #[arg(long, env = "KLEVAL_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Word vector file (text, optionally with a "count dim" header).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Directory with index.* and data.* lexical database files.
    #[arg(long, env = "KLEVAL_WORDNET_DIR")]
    pub wordnet: Option<PathBuf>,
    #[arg(long)]
    pub human_clusters: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClustererArg {
    Hac,
    Xmeans,
    Gmeans,
    Human,
}

impl ClustererArg {
    pub fn algorithm(self) -> Algorithm {
        match self {
            ClustererArg::Hac => Algorithm::Hac,
            ClustererArg::Xmeans => Algorithm::XMeans,
            ClustererArg::Gmeans => Algorithm::GMeans,
            ClustererArg::Human => Algorithm::HumanFile,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MatcherArg {
    Cosine,
    Wordnet,
    Gr,
}

impl MatcherArg {
    pub fn kind(self) -> MatcherKind {
        match self {
            MatcherArg::Cosine => MatcherKind::Cosine,
            MatcherArg::Wordnet => MatcherKind::WordNet,
            MatcherArg::Gr => MatcherKind::GaussianRegression,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ClusterFlags {
    #[arg(long, value_enum, default_value = "hac")]
    pub clustering: ClustererArg,
    /// Number of HAC clusters.
    #[arg(long, default_value_t = 8, conflicts_with = "hac_distance")]
    pub hac_clusters: usize,
    /// Cut the HAC dendrogram at this merge distance instead of a count.
    #[arg(long)]
    pub hac_distance: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub xmeans_kmax: usize,
    #[arg(long, default_value_t = 0.05)]
    pub gmeans_alpha: f64,
    /// Seed for the k-means steps of X-means and G-means.
    #[arg(long, default_value_t = 0)]
    pub cluster_seed: u64,
}

impl ClusterFlags {
    pub fn config(&self, algorithm: Algorithm) -> ClusterConfig {
        ClusterConfig {
            algorithm,
            hac_stop: match self.hac_distance {
                Some(d) => HacStop::Distance(d),
                None => HacStop::ClusterCount(self.hac_clusters),
            },
            xmeans_kmax: self.xmeans_kmax,
            gmeans_significance: self.gmeans_alpha,
            seed: self.cluster_seed,
            ..ClusterConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct MatchFlags {
    #[arg(long, default_value_t = 0.6)]
    pub cosine_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gr_threshold: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gr_ridge: f64,
    /// Hypernym hops allowed when matching through the lexical database.
    #[arg(long, default_value_t = 2)]
    pub wordnet_depth: usize,
    /// Compare only against each cluster's most frequent member.
    #[arg(long)]
    pub wordnet_exemplar: bool,
    /// Skip the exact string match that otherwise runs first.
    #[arg(long)]
    pub no_exact_match: bool,
    /// Laplace pseudo-count per cluster.
    #[arg(long, default_value_t = 1)]
    pub dummy_count: u32,
}

impl MatchFlags {
    pub fn config(&self, kind: MatcherKind) -> MatcherConfig {
        MatcherConfig {
            kind,
            cosine_threshold: self.cosine_threshold,
            gr_threshold: self.gr_threshold,
            gr_ridge: self.gr_ridge,
            wordnet_path: None,
            wordnet: WordNetOptions {
                depth: self.wordnet_depth,
                scope: if self.wordnet_exemplar {
                    WordNetScope::Exemplar
                } else {
                    WordNetScope::AllMembers
                },
            },
            exact_match_first: !self.no_exact_match,
        }
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        SmoothingConfig { dummy_count: self.dummy_count }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cluster: ClusterFlags,
    #[command(flatten)]
    pub matching: MatchFlags,
    #[arg(long, value_enum, default_value = "cosine")]
    pub matcher: MatcherArg,
    /// Prediction cutoff for MaxAnswer@k.
    #[arg(long, default_value_t = 10)]
    pub maxanswer_k: usize,
    /// Recorded in the report; scoring itself is not random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-question CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cluster: ClusterFlags,
    #[command(flatten)]
    pub matching: MatchFlags,
    /// Pipelines as `gold` or `<clusterer>-<matcher>`, e.g. `hac-cosine`.
    #[arg(long, value_delimiter = ',', default_value = "gold,hac-cosine")]
    pub pipelines: Vec<String>,
    /// Use every automatic clusterer × matcher combination.
    #[arg(long, conflicts_with = "pipelines")]
    pub grid: bool,
    /// Samplers: diverse, model-mix, MA, WR, WS.
    #[arg(long, value_delimiter = ',', default_value = "diverse,model-mix,MA,WR,WS")]
    pub samplers: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    /// Answers drawn per sampled distribution.
    #[arg(long, default_value_t = 100)]
    pub draw_size: usize,
    /// Matcher turning model predictions into the model-mix distribution.
    #[arg(long, value_enum, default_value = "cosine")]
    pub model_matcher: MatcherArg,
    /// Seed for the samplers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-question correlation CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Pipeline × sampler aggregate CSV.
    #[arg(long)]
    pub aggregate_csv: Option<PathBuf>,
    /// Per-sample (gold KL, automatic KL) pairs for scatter plots.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub eps: f64,
    /// Sample count for a single value.
    #[arg(long, conflicts_with_all = ["sweep", "target"])]
    pub n: Option<u64>,
    /// Inclusive range `LO..HI`, one CSV row per n.
    #[arg(long, conflicts_with = "target")]
    pub sweep: Option<String>,
    /// Print the smallest n whose bound is at most this value.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cluster: ClusterFlags,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub questions: usize,
    #[arg(long, default_value_t = 100)]
    pub answers: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}
