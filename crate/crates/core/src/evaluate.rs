//! Lexicon quality metrics against forced-alignment ground truth.
//!
//! Percentages are in [0, 100]. Entropies are base 2 with 0 log 0 = 0.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::normalized_edit_distance;
use crate::error::{LexiconError, Result};
use crate::io::{Clustering, Manifest};

/// How NED averages pairwise distances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NedMode {
    /// Mean within each cluster, then the unweighted mean over clusters.
    #[default]
    PerCluster,
    /// Mean over every within-cluster pair, pooled.
    PerPair,
}

impl std::str::FromStr for NedMode {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-cluster" => Ok(Self::PerCluster),
            "per-pair" => Ok(Self::PerPair),
            other => Err(LexiconError::Argument(format!(
                "unknown NED mode `{other}` (expected per-cluster or per-pair)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

/// Field order is the serialized order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when no cluster has two or more segments.
    pub ned: Option<f64>,
    pub purity: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub bitrate: f64,
    pub n_clusters: usize,
    /// Wall-clock seconds of the clustering stage, when measured.
    pub runtime_s: Option<f64>,
}

fn aligned(clustering: &Clustering, manifest: &Manifest) -> Result<Vec<usize>> {
    if manifest.is_empty() {
        return Err(LexiconError::Argument("cannot evaluate an empty manifest".into()));
    }
    Ok(clustering.aligned_to(manifest)?.labels().to_vec())
}

fn groups(clusters: &[usize]) -> Vec<Vec<usize>> {
    let k = clusters.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &c) in clusters.iter().enumerate() {
        out[c].push(i);
    }
    out
}

/// NED over phone transcriptions given per-segment cluster labels.
pub fn ned_from_labels<T: PartialEq + Sync>(clusters: &[usize], phones: &[&[T]], mode: NedMode) -> Option<f64> {
    assert_eq!(clusters.len(), phones.len());
    let per_cluster: Vec<(f64, usize)> = groups(clusters)
        .par_iter()
        .filter(|m| m.len() >= 2)
        .map(|m| {
            let mut sum = 0.0;
            let mut pairs = 0;
            for (x, &a) in m.iter().enumerate() {
                for &b in &m[x + 1..] {
                    sum += normalized_edit_distance(phones[a], phones[b]);
                    pairs += 1;
                }
            }
            (sum, pairs)
        })
        .collect();
    if per_cluster.is_empty() {
        return None;
    }
    let value = match mode {
        NedMode::PerCluster => {
            per_cluster.iter().map(|&(s, p)| s / p as f64).sum::<f64>() / per_cluster.len() as f64
        }
        NedMode::PerPair => {
            let (s, p) = per_cluster
                .iter()
                .fold((0.0, 0usize), |acc, &(s, p)| (acc.0 + s, acc.1 + p));
            s / p as f64
        }
    };
    Some(100.0 * value)
}

pub fn ned(clustering: &Clustering, manifest: &Manifest, mode: NedMode) -> Result<Option<f64>> {
    let clusters = aligned(clustering, manifest)?;
    let phones = manifest.phones()?;
    Ok(ned_from_labels(&clusters, &phones, mode))
}

/// Sorted (cluster, label) -> count table.
fn contingency(labels: &[usize], clusters: &[usize]) -> Vec<((usize, usize), usize)> {
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for (&l, &c) in labels.iter().zip(clusters) {
        *counts.entry((c, l)).or_default() += 1;
    }
    let mut table: Vec<_> = counts.into_iter().collect();
    table.sort_unstable();
    table
}

pub fn purity_from_labels(labels: &[usize], clusters: &[usize]) -> f64 {
    assert_eq!(labels.len(), clusters.len());
    let mut best: HashMap<usize, usize> = HashMap::new();
    for ((c, _), n) in contingency(labels, clusters) {
        let e = best.entry(c).or_default();
        *e = (*e).max(n);
    }
    100.0 * best.values().sum::<usize>() as f64 / labels.len() as f64
}

pub fn purity(clustering: &Clustering, manifest: &Manifest) -> Result<f64> {
    let clusters = aligned(clustering, manifest)?;
    let (labels, _) = manifest.label_indices()?;
    Ok(purity_from_labels(&labels, &clusters))
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

fn marginal(values: &[usize]) -> Vec<usize> {
    let mut counts = vec![0; values.iter().max().map_or(0, |m| m + 1)];
    for &v in values {
        counts[v] += 1;
    }
    counts
}

/// H(A | B) from the joint table keyed by (b, a).
fn conditional_entropy(table: &[((usize, usize), usize)], b_counts: &[usize], total: f64) -> f64 {
    table
        .iter()
        .map(|&((b, _), n)| {
            let p = n as f64 / total;
            -p * (n as f64 / b_counts[b] as f64).log2()
        })
        .sum()
}

pub fn v_measure_from_labels(labels: &[usize], clusters: &[usize]) -> VMeasure {
    assert_eq!(labels.len(), clusters.len());
    let total = labels.len() as f64;
    let label_counts = marginal(labels);
    let cluster_counts = marginal(clusters);
    let h_label = entropy(label_counts.iter().copied(), total);
    let h_cluster = entropy(cluster_counts.iter().copied(), total);
    let by_cluster = contingency(labels, clusters);
    let by_label = contingency(clusters, labels);

    let h = if h_label == 0.0 {
        1.0
    } else {
        (1.0 - conditional_entropy(&by_cluster, &cluster_counts, total) / h_label).clamp(0.0, 1.0)
    };
    let c = if h_cluster == 0.0 {
        1.0
    } else {
        (1.0 - conditional_entropy(&by_label, &label_counts, total) / h_cluster).clamp(0.0, 1.0)
    };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    VMeasure {
        homogeneity: 100.0 * h,
        completeness: 100.0 * c,
        v_measure: 100.0 * v,
    }
}

pub fn v_measure(clustering: &Clustering, manifest: &Manifest) -> Result<VMeasure> {
    let clusters = aligned(clustering, manifest)?;
    let (labels, _) = manifest.label_indices()?;
    Ok(v_measure_from_labels(&labels, &clusters))
}

/// Symbol rate (segments per second) times the unigram entropy of the emitted
/// cluster IDs.
pub fn bitrate_from_labels(clusters: &[usize], total_duration_s: f64) -> Result<f64> {
    if !(total_duration_s > 0.0) {
        return Err(LexiconError::Argument(format!(
            "bitrate needs a positive total duration, got {total_duration_s}"
        )));
    }
    let m = clusters.len() as f64;
    Ok(m / total_duration_s * entropy(marginal(clusters).into_iter(), m))
}

pub fn bitrate(clustering: &Clustering, manifest: &Manifest) -> Result<f64> {
    let clusters = aligned(clustering, manifest)?;
    bitrate_from_labels(&clusters, manifest.total_duration_s())
}

pub fn evaluate_all(
    clustering: &Clustering,
    manifest: &Manifest,
    runtime_s: Option<f64>,
    mode: NedMode,
) -> Result<EvalReport> {
    let clusters = aligned(clustering, manifest)?;
    let (labels, _) = manifest.label_indices()?;
    let phones = manifest.phones()?;
    let vm = v_measure_from_labels(&labels, &clusters);
    Ok(EvalReport {
        ned: ned_from_labels(&clusters, &phones, mode),
        purity: purity_from_labels(&labels, &clusters),
        homogeneity: vm.homogeneity,
        completeness: vm.completeness,
        v_measure: vm.v_measure,
        bitrate: bitrate_from_labels(&clusters, manifest.total_duration_s())?,
        n_clusters: clustering.n_clusters(),
        runtime_s,
    })
}

/// Aligned plain-text table, one row per named report.
pub fn render_table(rows: &[(String, EvalReport)]) -> String {
    let header = [
        "system", "NED (%)", "purity (%)", "H (%)", "C (%)", "V (%)", "bitrate", "clusters", "runtime (s)",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                r.ned.map_or("n/a".into(), |v| format!("{v:.1}")),
                format!("{:.1}", r.purity),
                format!("{:.1}", r.homogeneity),
                format!("{:.1}", r.completeness),
                format!("{:.1}", r.v_measure),
                format!("{:.1}", r.bitrate),
                r.n_clusters.to_string(),
                r.runtime_s.map_or("n/a".into(), |v| format!("{v:.2}")),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| cells.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let mut line = |fields: Vec<&str>| {
        let parts: Vec<String> = fields
            .iter()
            .enumerate()
            .map(|(i, f)| if i == 0 { format!("{f:<w$}", w = widths[i]) } else { format!("{f:>w$}", w = widths[i]) })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in &cells {
        line(row.iter().map(String::as_str).collect());
    }
    out
}
