//! Clustering methods: k-means, BIRCH, Ward agglomeration and Leiden on
//! threshold similarity graphs.

pub mod birch;
pub mod graph;
pub mod kmeans;
pub mod leiden;
pub mod ward;

pub use birch::{birch, BirchConfig, DEFAULT_BIRCH_THRESHOLD, DEFAULT_BRANCHING};
pub use graph::{build_graph, cpm_quality, default_threshold, graph_from_table, IncrementalGraphBuilder, SimilarityGraph};
pub use kmeans::{kmeans, kmeans_pp_init, lloyd, KMeansConfig, KMeansModel};
pub use leiden::{leiden, leiden_traced, tune_gamma, GammaSearch, LeidenConfig, LeidenOutcome, DEFAULT_GAMMA_STEPS};
pub use ward::{agglomerative_ward, ward_linkage};
