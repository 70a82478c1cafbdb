//! Representation/clustering systems and the idealization experiments.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    agglomerative_ward, birch, build_graph, default_threshold, kmeans, leiden, lloyd, tune_gamma, BirchConfig,
    GammaSearch, KMeansConfig, LeidenConfig, SimilarityGraph, DEFAULT_BIRCH_THRESHOLD, DEFAULT_BRANCHING,
    DEFAULT_GAMMA_STEPS,
};
use crate::distance::{DistanceKind, DtwOptions, ItemSet};
use crate::error::{LexiconError, Result};
use crate::evaluate::{evaluate_all, EvalReport, NedMode};
use crate::io::{Clustering, FrameFeatureSequence, Manifest, UnitSequence};
use crate::seed::SeedStream;
use crate::transform::{
    apply_pca, average_embed, dpdp_smooth, embedding_matrix, fit_pca, normalize_mean_variance, train_codebook,
    unit_vector, WordEmbedding, DEFAULT_CODEBOOK_SIZE, DEFAULT_PCA_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    ContinuousAvg,
    ContinuousSeq,
    DiscreteSeq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Birch,
    Agglom,
    Graph,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ContinuousAvg => "continuous-avg",
            Self::ContinuousSeq => "continuous-seq",
            Self::DiscreteSeq => "discrete-seq",
        }
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Kmeans => "kmeans",
            Self::Birch => "birch",
            Self::Agglom => "agglom",
            Self::Graph => "graph",
        }
    }
}

impl FromStr for Representation {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous-avg" | "avg" => Ok(Self::ContinuousAvg),
            "continuous-seq" | "dtw" => Ok(Self::ContinuousSeq),
            "discrete-seq" | "edit" => Ok(Self::DiscreteSeq),
            other => Err(LexiconError::Argument(format!("unknown representation `{other}`"))),
        }
    }
}

impl FromStr for Method {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "birch" => Ok(Self::Birch),
            "agglom" => Ok(Self::Agglom),
            "graph" => Ok(Self::Graph),
            other => Err(LexiconError::Argument(format!("unknown clustering method `{other}`"))),
        }
    }
}

/// The six systems, in table order.
pub const TABLE_SYSTEMS: [(Representation, Method); 6] = [
    (Representation::ContinuousAvg, Method::Kmeans),
    (Representation::ContinuousAvg, Method::Birch),
    (Representation::ContinuousAvg, Method::Agglom),
    (Representation::ContinuousAvg, Method::Graph),
    (Representation::ContinuousSeq, Method::Graph),
    (Representation::DiscreteSeq, Method::Graph),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Cluster count; the true type count when absent.
    pub k: Option<usize>,
    /// CPM resolution; tuned toward `k` when absent.
    pub gamma: Option<f64>,
    /// Graph distance threshold; per-kind default when absent.
    pub threshold: Option<f64>,
    pub seed: u64,
    pub birch_threshold: f64,
    pub branching: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub gamma_steps: usize,
    pub leiden_randomness: f64,
    pub dtw_band: Option<usize>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            k: None,
            gamma: None,
            threshold: None,
            seed: 0,
            birch_threshold: DEFAULT_BIRCH_THRESHOLD,
            branching: DEFAULT_BRANCHING,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-4,
            gamma_steps: DEFAULT_GAMMA_STEPS,
            leiden_randomness: 0.01,
            dtw_band: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystemSpec {
    representation: Representation,
    method: Method,
    #[serde(default)]
    distance: Option<DistanceKind>,
    #[serde(default)]
    hyperparameters: Hyperparameters,
}

/// A valid representation/method pairing. Only the six table systems can be
/// constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemSpec")]
pub struct SystemSpec {
    representation: Representation,
    method: Method,
    distance: DistanceKind,
    pub hyperparameters: Hyperparameters,
}

impl TryFrom<RawSystemSpec> for SystemSpec {
    type Error = LexiconError;

    fn try_from(raw: RawSystemSpec) -> Result<Self> {
        let mut spec = SystemSpec::new(raw.representation, raw.method)?;
        if let Some(d) = raw.distance {
            if d != spec.distance {
                return Err(LexiconError::Argument(format!(
                    "system {spec} uses {} distance, not {d}",
                    spec.distance
                )));
            }
        }
        spec.hyperparameters = raw.hyperparameters;
        Ok(spec)
    }
}

impl SystemSpec {
    pub fn new(representation: Representation, method: Method) -> Result<Self> {
        if !TABLE_SYSTEMS.contains(&(representation, method)) {
            return Err(LexiconError::InvalidSystem(format!(
                "{} representations cannot be clustered with {}",
                representation.as_str(),
                method.as_str()
            )));
        }
        let distance = match representation {
            Representation::ContinuousAvg => DistanceKind::Cosine,
            Representation::ContinuousSeq => DistanceKind::Dtw,
            Representation::DiscreteSeq => DistanceKind::Edit,
        };
        Ok(Self {
            representation,
            method,
            distance,
            hyperparameters: Hyperparameters::default(),
        })
    }

    /// All six systems in table order with default hyperparameters.
    pub fn table(seed: u64) -> Vec<SystemSpec> {
        TABLE_SYSTEMS
            .iter()
            .map(|&(r, m)| {
                let mut s = SystemSpec::new(r, m).expect("table systems are valid");
                s.hyperparameters.seed = seed;
                s
            })
            .collect()
    }

    pub fn with_hyperparameters(mut self, hyperparameters: Hyperparameters) -> Self {
        self.hyperparameters = hyperparameters;
        self
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn distance(&self) -> DistanceKind {
        self.distance
    }

    pub fn needs_units(&self) -> bool {
        self.representation == Representation::DiscreteSeq
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.representation.as_str(), self.method.as_str())
    }
}

impl FromStr for SystemSpec {
    type Err = LexiconError;

    /// `<representation>+<method>`, e.g. `continuous-avg+kmeans` or `edit+graph`.
    fn from_str(s: &str) -> Result<Self> {
        let (r, m) = s
            .split_once('+')
            .ok_or_else(|| LexiconError::Argument(format!("system `{s}` is not of the form <representation>+<method>")))?;
        SystemSpec::new(r.parse()?, m.parse()?)
    }
}

/// Which segments the PCA projection is fitted on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaFit {
    /// Pooled frames of every segment.
    #[default]
    All,
    /// Pooled frames of the first `n` segments in manifest order.
    First(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    /// `None` disables PCA; a value at or above the feature dimension does too.
    pub pca_dim: Option<usize>,
    pub pca_fit: PcaFit,
    pub codebook_size: usize,
    pub dpdp_lambda: f64,
    pub codebook_seed: u64,
    /// Noise for perfect embeddings.
    pub perfect_sigma: f64,
    pub ned_mode: NedMode,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            pca_dim: Some(DEFAULT_PCA_DIM),
            pca_fit: PcaFit::All,
            codebook_size: DEFAULT_CODEBOOK_SIZE,
            dpdp_lambda: 0.0,
            codebook_seed: 0,
            perfect_sigma: 1e-4,
            ned_mode: NedMode::PerCluster,
        }
    }
}

/// Every representation of one corpus, aligned with the manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    /// Normalized (and projected) frame sequences.
    pub sequences: Vec<FrameFeatureSequence>,
    pub embeddings: Vec<WordEmbedding>,
    /// Smoothed unit sequences from raw frames, when requested.
    pub units: Option<Vec<UnitSequence>>,
    pub ned_mode: NedMode,
}

/// Normalizes, optionally projects and averages the raw features; quantizes
/// the raw (unnormalized) features when `with_units` is set.
pub fn prepare(
    manifest: Manifest,
    raw: Vec<FrameFeatureSequence>,
    config: &PrepConfig,
    with_units: bool,
) -> Result<Dataset> {
    if raw.len() != manifest.len() {
        return Err(LexiconError::Validation(format!(
            "{} feature sequences for {} segments",
            raw.len(),
            manifest.len()
        )));
    }
    if let Some((seq, id)) = raw.iter().zip(manifest.segment_ids()).find(|(s, id)| s.segment_id != *id) {
        return Err(LexiconError::Validation(format!(
            "feature sequence `{}` found where manifest has `{id}`",
            seq.segment_id
        )));
    }
    let units = if with_units {
        let seeds = SeedStream::new(config.codebook_seed);
        let codebook = train_codebook(&raw, config.codebook_size, seeds.seed_for("codebook"))?;
        Some(
            raw.par_iter()
                .map(|s| dpdp_smooth(s, &codebook, config.dpdp_lambda))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let (mut sequences, _) = normalize_mean_variance(&raw)?;
    drop(raw);
    let dim = sequences[0].dim();
    match config.pca_dim {
        Some(d) if d < dim => {
            let fit_on = match config.pca_fit {
                PcaFit::All => &sequences[..],
                PcaFit::First(n) => &sequences[..n.min(sequences.len())],
            };
            let pca = fit_pca(fit_on, d)?;
            sequences = sequences
                .par_iter()
                .map(|s| apply_pca(s, &pca))
                .collect::<Result<Vec<_>>>()?;
        }
        Some(d) => log::info!("PCA to {d} dims skipped: features have only {dim}"),
        None => {}
    }
    let embeddings = sequences
        .par_iter()
        .map(average_embed)
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        manifest,
        sequences,
        embeddings,
        units,
        ned_mode: config.ned_mode,
    })
}

impl Dataset {
    /// Number of distinct word labels.
    pub fn true_k(&self) -> Result<usize> {
        Ok(self.manifest.label_indices()?.1.len())
    }

    fn resolve_k(&self, spec: &SystemSpec) -> Result<usize> {
        match spec.hyperparameters.k {
            Some(k) => Ok(k),
            None => self.true_k(),
        }
    }

    fn items(&self, spec: &SystemSpec) -> Result<ItemSet> {
        match spec.representation {
            Representation::ContinuousAvg => ItemSet::embeddings(&self.embeddings),
            Representation::ContinuousSeq => ItemSet::sequences(
                &self.sequences,
                DtwOptions {
                    band: spec.hyperparameters.dtw_band,
                },
            ),
            Representation::DiscreteSeq => {
                let units = self.units.as_ref().ok_or_else(|| {
                    LexiconError::Argument("dataset has no unit sequences; prepare it with units".into())
                })?;
                Ok(ItemSet::units(units))
            }
        }
    }
}

/// Outcome of clustering one dataset with one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRun {
    pub labels: Vec<usize>,
    pub gamma: Option<GammaSearch>,
    pub runtime_s: f64,
}

fn seeds(spec: &SystemSpec) -> SeedStream {
    SeedStream::new(spec.hyperparameters.seed)
}

fn graph_for(spec: &SystemSpec, data: &Dataset) -> Result<SimilarityGraph> {
    let threshold = spec
        .hyperparameters
        .threshold
        .unwrap_or_else(|| default_threshold(spec.distance));
    build_graph(&data.items(spec)?, threshold)
}

fn resolve_gamma(spec: &SystemSpec, graph: &SimilarityGraph, k: usize) -> Result<(f64, Option<GammaSearch>)> {
    match spec.hyperparameters.gamma {
        Some(g) => Ok((g, None)),
        None => {
            let search = tune_gamma(graph, k, seeds(spec).seed_for("leiden"), spec.hyperparameters.gamma_steps)?;
            Ok((search.gamma, Some(search)))
        }
    }
}

fn leiden_config(spec: &SystemSpec, gamma: f64) -> LeidenConfig {
    LeidenConfig {
        randomness: spec.hyperparameters.leiden_randomness,
        ..LeidenConfig::new(gamma, seeds(spec).seed_for("leiden"))
    }
}

/// Clusters `data` with `spec`, timing everything after the representations
/// are loaded (distances, graph, tuning, clustering).
pub fn cluster_dataset(spec: &SystemSpec, data: &Dataset, k: usize) -> Result<ClusterRun> {
    let h = &spec.hyperparameters;
    let start = Instant::now();
    let mut gamma = None;
    let labels = match spec.method {
        Method::Kmeans => {
            let points = embedding_matrix(&data.embeddings)?;
            let config = KMeansConfig {
                max_iter: h.kmeans_max_iter,
                tol: h.kmeans_tol,
                ..KMeansConfig::new(k, seeds(spec).seed_for("kmeans"))
            };
            kmeans(points.view(), &config)?.1
        }
        Method::Birch => {
            let points = embedding_matrix(&data.embeddings)?;
            let config = BirchConfig {
                threshold: h.birch_threshold,
                branching: h.branching,
                k,
            };
            birch(points.view(), &config)?
        }
        Method::Agglom => agglomerative_ward(embedding_matrix(&data.embeddings)?.view(), k)?,
        Method::Graph => {
            let graph = graph_for(spec, data)?;
            let (g, search) = resolve_gamma(spec, &graph, k)?;
            gamma = search;
            leiden(&graph, &leiden_config(spec, g), None)?.membership
        }
    };
    Ok(ClusterRun {
        labels,
        gamma,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemRun {
    pub system: String,
    #[serde(skip)]
    pub clustering: Clustering,
    pub report: EvalReport,
    pub gamma: Option<GammaSearch>,
}

fn finish(spec: &SystemSpec, data: &Dataset, run: ClusterRun) -> Result<SystemRun> {
    let clustering = Clustering::for_manifest(&data.manifest, &run.labels)?;
    let report = evaluate_all(&clustering, &data.manifest, Some(run.runtime_s), data.ned_mode)?;
    Ok(SystemRun {
        system: spec.to_string(),
        clustering,
        report,
        gamma: run.gamma,
    })
}

/// Clusters and evaluates; `k` defaults to the true type count.
pub fn run_system(spec: &SystemSpec, data: &Dataset) -> Result<SystemRun> {
    let k = data.resolve_k(spec)?;
    let run = cluster_dataset(spec, data, k)?;
    finish(spec, data, run)
}

/// Runs the systems one after another, so runtimes do not compete, and returns
/// rows in the given order.
pub fn compare_systems(specs: &[SystemSpec], data: &Dataset) -> Result<Vec<SystemRun>> {
    specs.iter().map(|s| run_system(s, data)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfectInitRun {
    /// Score of the label partition itself.
    pub initial: EvalReport,
    pub converged: SystemRun,
}

/// Starts k-means from the type-mean centroids, or Leiden from the label
/// partition, and lets the method converge. The graph system uses the gamma a
/// normal run would use (tuned from scratch toward `k` unless fixed).
pub fn perfect_init(spec: &SystemSpec, data: &Dataset) -> Result<PerfectInitRun> {
    let (labels, types) = data.manifest.label_indices()?;
    let initial_clustering = Clustering::for_manifest(&data.manifest, &labels)?;
    let initial = evaluate_all(&initial_clustering, &data.manifest, None, data.ned_mode)?;
    let k = spec.hyperparameters.k.unwrap_or(types.len());
    let h = &spec.hyperparameters;
    let start = Instant::now();
    let (membership, gamma) = match spec.method {
        Method::Kmeans => {
            let points = embedding_matrix(&data.embeddings)?;
            if k != types.len() {
                return Err(LexiconError::Argument(format!(
                    "perfect initialization places one centroid per type ({}), not k={k}",
                    types.len()
                )));
            }
            let means = type_means(&points, &labels, types.len());
            (lloyd(points.view(), means, h.kmeans_max_iter, h.kmeans_tol)?.1, None)
        }
        Method::Graph => {
            let graph = graph_for(spec, data)?;
            let (g, search) = resolve_gamma(spec, &graph, k)?;
            (leiden(&graph, &leiden_config(spec, g), Some(&labels))?.membership, search)
        }
        other => {
            return Err(LexiconError::Argument(format!(
                "perfect initialization supports kmeans and graph, not {}",
                other.as_str()
            )))
        }
    };
    let run = ClusterRun {
        labels: membership,
        gamma,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok(PerfectInitRun {
        initial,
        converged: finish(spec, data, run)?,
    })
}

fn type_means(points: &Array2<f32>, labels: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (row, &l) in points.outer_iter().zip(labels) {
        counts[l] += 1;
        for (acc, &v) in sums.row_mut(l).iter_mut().zip(row) {
            *acc += f64::from(v);
        }
    }
    for (mut row, &c) in sums.outer_iter_mut().zip(&counts) {
        row /= c as f64;
    }
    sums
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfectMode {
    /// Each embedding becomes its type mean plus small Gaussian noise.
    Embedding,
    /// One randomly chosen instance per type stands in for all instances.
    Sequence,
}

impl FromStr for PerfectMode {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Self::Embedding),
            "sequence" => Ok(Self::Sequence),
            other => Err(LexiconError::Argument(format!("unknown perfect-representation mode `{other}`"))),
        }
    }
}

/// Replaces representations with ideal ones built from the word labels.
/// Manifest, and with it the phone transcriptions, is left untouched.
pub fn perfect_representations(data: &Dataset, mode: PerfectMode, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(LexiconError::Argument(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    let (labels, types) = data.manifest.label_indices()?;
    let seeds = SeedStream::new(seed);
    let mut out = data.clone();
    match mode {
        PerfectMode::Embedding => {
            let points = embedding_matrix(&data.embeddings)?;
            let means = type_means(&points, &labels, types.len());
            for (t, row) in means.outer_iter().enumerate() {
                if row.iter().all(|&x| x == 0.0) {
                    return Err(LexiconError::Degenerate(format!("word type `{}` has a zero mean embedding", types[t])));
                }
            }
            let mut rng = seeds.rng("perfect-embedding");
            let noise = Normal::new(0.0, sigma).expect("validated sigma");
            for (emb, &l) in out.embeddings.iter_mut().zip(&labels) {
                let v: Vec<f64> = means.row(l).iter().map(|&m| m + noise.sample(&mut rng)).collect();
                emb.vector = unit_vector(&v).ok_or_else(|| {
                    LexiconError::Degenerate(format!("perturbed mean of type `{}` vanished", types[l]))
                })?;
            }
        }
        PerfectMode::Sequence => {
            let mut members = vec![Vec::new(); types.len()];
            for (i, &l) in labels.iter().enumerate() {
                members[l].push(i);
            }
            let mut rng = seeds.rng("perfect-sequence");
            let reps: Vec<usize> = members
                .iter()
                .map(|m| m[rng.random_range(0..m.len())])
                .collect();
            for (i, &l) in labels.iter().enumerate() {
                let r = reps[l];
                out.sequences[i].frames = data.sequences[r].frames.clone();
                out.embeddings[i].vector = data.embeddings[r].vector.clone();
                if let (Some(dst), Some(src)) = (out.units.as_mut(), data.units.as_ref()) {
                    dst[i].units = src[r].units.clone();
                }
            }
        }
    }
    Ok(out)
}

/// Declarative input of `experiment compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub prep: PrepConfig,
    /// Defaults to the six table systems.
    #[serde(default)]
    pub systems: Option<Vec<SystemSpec>>,
    #[serde(default)]
    pub seed: u64,
}

impl CompareConfig {
    pub fn systems(&self) -> Vec<SystemSpec> {
        self.systems.clone().unwrap_or_else(|| SystemSpec::table(self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, InstanceCount, SynthConfig};

    fn corpus(sigma: f64, seed: u64) -> Dataset {
        corpus_with_jitter(sigma, 0.2, seed)
    }

    fn corpus_with_jitter(sigma: f64, length_jitter: f64, seed: u64) -> Dataset {
        let c = generate(&SynthConfig {
            length_jitter,
            n_types: 8,
            instances_per_type: InstanceCount::Range([3, 6]),
            dim: 12,
            mean_len: 16,
            within_type_noise: sigma,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let prep = PrepConfig {
            codebook_size: 24,
            ..PrepConfig::default()
        };
        prepare(c.manifest, c.features, &prep, true).unwrap()
    }

    #[test]
    fn only_table_systems_are_constructible() {
        let mut valid = 0;
        for r in [Representation::ContinuousAvg, Representation::ContinuousSeq, Representation::DiscreteSeq] {
            for m in [Method::Kmeans, Method::Birch, Method::Agglom, Method::Graph] {
                valid += usize::from(SystemSpec::new(r, m).is_ok());
            }
        }
        assert_eq!(valid, 6);
        assert!("discrete-seq+kmeans".parse::<SystemSpec>().is_err());
        assert_eq!("edit+graph".parse::<SystemSpec>().unwrap().distance(), DistanceKind::Edit);
        let json = r#"{"representation": "continuous-seq", "method": "birch"}"#;
        assert!(serde_json::from_str::<SystemSpec>(json).is_err());
        let json = r#"{"representation": "continuous-avg", "method": "graph", "distance": "dtw"}"#;
        assert!(serde_json::from_str::<SystemSpec>(json).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let mut spec: SystemSpec = "continuous-seq+graph".parse().unwrap();
        spec.hyperparameters.dtw_band = Some(3);
        let back: SystemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn every_system_is_perfect_on_noiseless_data() {
        // jitter alone spreads averaged embeddings enough to mislead k-means++ seeding
        let data = corpus_with_jitter(0.0, 0.0, 1);
        for spec in SystemSpec::table(3) {
            let run = run_system(&spec, &data).unwrap();
            assert_eq!(run.report.purity, 100.0, "{spec}");
            assert_eq!(run.report.ned, Some(0.0), "{spec}");
        }
    }

    #[test]
    fn perfect_init_scores_full_at_start() {
        let data = corpus(0.8, 2);
        for name in ["continuous-avg+kmeans", "discrete-seq+graph", "continuous-avg+graph"] {
            let run = perfect_init(&name.parse().unwrap(), &data).unwrap();
            assert_eq!((run.initial.purity, run.initial.v_measure), (100.0, 100.0));
        }
        assert!(perfect_init(&"continuous-avg+birch".parse().unwrap(), &data).is_err());
    }

    #[test]
    fn perfect_embeddings_with_zero_noise_collapse_types() {
        let data = corpus(0.3, 4);
        let ideal = perfect_representations(&data, PerfectMode::Embedding, 0.0, 1).unwrap();
        let mut distinct: Vec<&Vec<f32>> = ideal.embeddings.iter().map(|e| &e.vector).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        assert_eq!(distinct.len(), data.true_k().unwrap());
        assert_eq!(ideal.manifest, data.manifest);
    }

    #[test]
    fn perfect_sequences_copy_one_instance_per_type() {
        let data = corpus(0.3, 5);
        let ideal = perfect_representations(&data, PerfectMode::Sequence, 0.0, 9).unwrap();
        let labels = data.manifest.word_labels().unwrap();
        let units = ideal.units.as_ref().unwrap();
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == labels[j] {
                    assert_eq!(units[i].units, units[j].units);
                    assert_eq!(ideal.sequences[i].frames, ideal.sequences[j].frames);
                }
            }
            assert_eq!(ideal.sequences[i].segment_id, data.sequences[i].segment_id);
        }
        let run = run_system(&"discrete-seq+graph".parse().unwrap(), &ideal).unwrap();
        assert_eq!((run.report.purity, run.report.v_measure), (100.0, 100.0));
    }

    #[test]
    fn compare_keeps_spec_order_and_is_deterministic() {
        let data = corpus(0.2, 6);
        let specs = SystemSpec::table(1);
        let a = compare_systems(&specs, &data).unwrap();
        let b = compare_systems(&specs, &data).unwrap();
        assert_eq!(a.len(), 6);
        for ((x, y), s) in a.iter().zip(&b).zip(&specs) {
            assert_eq!(x.system, s.to_string());
            assert_eq!(x.clustering, y.clustering);
        }
    }

    #[test]
    fn prepare_rejects_misaligned_features() {
        let c = generate(&SynthConfig {
            n_types: 3,
            instances_per_type: InstanceCount::Fixed(2),
            dim: 4,
            mean_len: 6,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut features = c.features.clone();
        features.swap(0, 1);
        assert!(prepare(c.manifest.clone(), features, &PrepConfig::default(), false).is_err());
    }
}
