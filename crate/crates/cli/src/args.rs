use std::path::PathBuf;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexicon_core::distance::DistanceKind;
use lexicon_core::evaluate::NedMode;
use lexicon_core::experiment::{Hyperparameters, Method, PcaFit, PerfectMode, PrepConfig, Representation, SystemSpec};

static LONG_VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{}\nlexicon-core {}\ntarget {}-{}\nprofile {}",
        env!("CARGO_PKG_VERSION"),
        lexicon_core::VERSION,
        std::env::consts::ARCH,
        std::env::consts::OS,
        if cfg!(debug_assertions) { "debug" } else { "release" },
    )
});

#[derive(Debug, Parser)]
#[command(name = "lexicon", version, long_version = LONG_VERSION.as_str())]
#[command(about = "Learn a lexicon of word types from pre-segmented unlabeled speech features")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "LEXICON_WORKERS")]
    pub workers: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize, project, embed or quantize frame features.
    #[command(subcommand)]
    Transform(TransformCommand),
    /// Pairwise distance tables.
    #[command(subcommand)]
    Distance(DistanceCommand),
    /// Cluster prepared representations.
    #[command(subcommand)]
    Cluster(ClusterCommand),
    /// Score a clustering against the manifest labels.
    Evaluate(EvaluateArgs),
    /// Full systems and idealization experiments.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Synthetic corpora.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Segment manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of per-segment feature files, or a directory holding `features/`.
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum TransformCommand {
    /// Standardize every dimension over the pooled frames.
    Normalize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fit (or load) a PCA projection and apply it.
    Pca {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = lexicon_core::transform::DEFAULT_PCA_DIM, conflicts_with = "projection")]
        dim: usize,
        /// Fit on the first N segments only.
        #[arg(long, conflicts_with = "projection")]
        fit_first: Option<usize>,
        /// Apply a saved projection instead of fitting.
        #[arg(long)]
        projection: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Average each segment into a unit-norm embedding.
    Embed {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train (or load) a codebook and smooth frames into unit sequences.
    Quantize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = lexicon_core::transform::DEFAULT_CODEBOOK_SIZE, conflicts_with = "codebook")]
        codebook_size: usize,
        /// Apply a saved codebook instead of training one.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Penalty per unit change; 0 is plain nearest-centroid quantization.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum DistanceCommand {
    /// Upper-triangular table of all pairwise distances.
    Pairwise {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(DistanceKind))]
        kind: DistanceKind,
        /// Embeddings file (cosine), feature directory (dtw) or unit directory (edit).
        #[arg(long)]
        input: PathBuf,
        /// Sakoe-Chiba band for DTW.
        #[arg(long)]
        band: Option<usize>,
        /// Refuse tables larger than this many bytes.
        #[arg(long, default_value_t = lexicon_core::distance::DEFAULT_TABLE_BUDGET_BYTES)]
        budget_bytes: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReprArg {
    /// Averaged embeddings.
    Avg,
    /// Frame sequences compared with DTW.
    Dtw,
    /// Unit sequences compared with edit distance.
    Edit,
}

impl From<ReprArg> for Representation {
    fn from(r: ReprArg) -> Self {
        match r {
            ReprArg::Avg => Representation::ContinuousAvg,
            ReprArg::Dtw => Representation::ContinuousSeq,
            ReprArg::Edit => Representation::DiscreteSeq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kmeans,
    Birch,
    Agglom,
    Graph,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kmeans => Method::Kmeans,
            MethodArg::Birch => Method::Birch,
            MethodArg::Agglom => Method::Agglom,
            MethodArg::Graph => Method::Graph,
        }
    }
}

/// Overrides for system hyperparameters.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// Number of clusters; the true type count when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    /// CPM resolution; tuned toward k when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Graph edge threshold on distance.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub birch_threshold: Option<f64>,
    #[arg(long)]
    pub branching: Option<usize>,
    #[arg(long)]
    pub kmeans_max_iter: Option<usize>,
    #[arg(long)]
    pub gamma_steps: Option<usize>,
    #[arg(long)]
    pub dtw_band: Option<usize>,
}

impl HyperArgs {
    pub fn apply(&self, mut h: Hyperparameters) -> Hyperparameters {
        if self.k.is_some() {
            h.k = self.k;
        }
        if self.gamma.is_some() {
            h.gamma = self.gamma;
        }
        if self.threshold.is_some() {
            h.threshold = self.threshold;
        }
        if let Some(s) = self.seed {
            h.seed = s;
        }
        if let Some(t) = self.birch_threshold {
            h.birch_threshold = t;
        }
        if let Some(b) = self.branching {
            h.branching = b;
        }
        if let Some(m) = self.kmeans_max_iter {
            h.kmeans_max_iter = m;
        }
        if let Some(g) = self.gamma_steps {
            h.gamma_steps = g;
        }
        if self.dtw_band.is_some() {
            h.dtw_band = self.dtw_band;
        }
        h
    }
}

#[derive(Debug, Subcommand)]
pub enum ClusterCommand {
    /// Cluster one representation with one method.
    Run(ClusterRunArgs),
}

#[derive(Debug, Args)]
pub struct ClusterRunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum)]
    pub repr: ReprArg,
    /// Embeddings file or directory (avg), feature directory (dtw) or unit directory (edit).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Both,
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub clustering: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "per-cluster", value_parser = clap::value_parser!(NedMode))]
    pub ned_mode: NedMode,
    /// Runtime to record in the report, in seconds.
    #[arg(long)]
    pub runtime: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Feature preparation shared by the experiment commands.
#[derive(Debug, Clone, Default, Args)]
pub struct PrepArgs {
    /// JSON preparation config; flags below override it.
    #[arg(long)]
    pub prep: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_pca")]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    pub no_pca: bool,
    /// Fit PCA on the first N segments only.
    #[arg(long)]
    pub pca_fit_first: Option<usize>,
    #[arg(long)]
    pub codebook_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed of the codebook; defaults to the system seed.
    #[arg(long)]
    pub codebook_seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(NedMode))]
    pub ned_mode: Option<NedMode>,
}

impl PrepArgs {
    pub fn apply(&self, mut p: PrepConfig, seed: Option<u64>) -> PrepConfig {
        if self.no_pca {
            p.pca_dim = None;
        } else if self.pca_dim.is_some() {
            p.pca_dim = self.pca_dim;
        }
        if let Some(n) = self.pca_fit_first {
            p.pca_fit = PcaFit::First(n);
        }
        if let Some(k) = self.codebook_size {
            p.codebook_size = k;
        }
        if let Some(l) = self.lambda {
            p.dpdp_lambda = l;
        }
        if let Some(s) = self.codebook_seed.or(seed) {
            p.codebook_seed = s;
        }
        if let Some(m) = self.ned_mode {
            p.ned_mode = m;
        }
        p
    }
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// `<representation>+<method>`, e.g. `continuous-avg+graph`.
    #[arg(long, value_parser = clap::value_parser!(SystemSpec))]
    pub system: SystemSpec,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    /// Prepare features, cluster and evaluate with one system.
    Run {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        prep: PrepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Start from the label partition and let the method converge.
    PerfectInit {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        prep: PrepArgs,
        /// Skip the ordinary run used for comparison.
        #[arg(long)]
        no_baseline: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Replace representations with ideal ones built from the labels.
    PerfectRepr {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        prep: PrepArgs,
        #[arg(long, value_parser = clap::value_parser!(PerfectMode))]
        mode: PerfectMode,
        /// Noise added to type means before renormalizing.
        #[arg(long, default_value_t = 1e-4)]
        sigma: f64,
        #[arg(long)]
        no_baseline: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a list of systems from a JSON config on one corpus.
    Compare {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// JSON with optional `prep`, `systems` and `seed`; the six table systems by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum SynthCommand {
    /// Write a synthetic manifest and feature files.
    Generate {
        /// JSON generator config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config noise level.
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate one system over noise levels and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "continuous-avg+agglom", value_parser = clap::value_parser!(SystemSpec))]
        system: SystemSpec,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.5")]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[command(flatten)]
        prep: PrepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}
