//! BIRCH: a clustering-feature tree of subclusters bounded by a radius
//! threshold, followed by Ward agglomeration of the leaf subclusters.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::ward::{cut_dendrogram, ward_linkage};
use crate::error::{LexiconError, Result};

pub const DEFAULT_BIRCH_THRESHOLD: f64 = 0.25;
pub const DEFAULT_BRANCHING: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirchConfig {
    pub threshold: f64,
    pub branching: usize,
    pub k: usize,
}

impl BirchConfig {
    pub fn new(k: usize) -> Self {
        Self {
            threshold: DEFAULT_BIRCH_THRESHOLD,
            branching: DEFAULT_BRANCHING,
            k,
        }
    }
}

/// Clustering feature: count, linear sum and sum of squared norms.
#[derive(Debug, Clone)]
struct Feature {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Feature {
    fn of_point(x: &[f64]) -> Self {
        Self {
            n: 1.0,
            ls: x.to_vec(),
            ss: x.iter().map(|v| v * v).sum(),
        }
    }

    fn empty(d: usize) -> Self {
        Self {
            n: 0.0,
            ls: vec![0.0; d],
            ss: 0.0,
        }
    }

    fn add(&mut self, other: &Feature) {
        self.n += other.n;
        self.ss += other.ss;
        self.ls.iter_mut().zip(&other.ls).for_each(|(a, b)| *a += b);
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    fn sq_dist_to(&self, x: &[f64]) -> f64 {
        self.ls
            .iter()
            .zip(x)
            .map(|(l, v)| {
                let d = l / self.n - v;
                d * d
            })
            .sum()
    }

    /// Radius of the subcluster obtained by absorbing `x`.
    fn radius_with(&self, x: &[f64]) -> f64 {
        let n = self.n + 1.0;
        let ss = self.ss + x.iter().map(|v| v * v).sum::<f64>();
        let centroid_sq: f64 = self
            .ls
            .iter()
            .zip(x)
            .map(|(l, v)| {
                let c = (l + v) / n;
                c * c
            })
            .sum();
        (ss / n - centroid_sq).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
struct Subcluster {
    id: usize,
    feature: Feature,
}

#[derive(Debug)]
enum Node {
    Leaf(Vec<Subcluster>),
    Inner(Vec<(Feature, Node)>),
}

struct Tree {
    threshold: f64,
    branching: usize,
    dim: usize,
    next_id: usize,
}

impl Tree {
    /// Inserts `x`, returning the subcluster it joined and, when the node
    /// overflowed, the sibling split off from it.
    fn insert(&mut self, node: &mut Node, x: &[f64]) -> (usize, Option<Node>) {
        match node {
            Node::Leaf(subs) => {
                let closest = closest_index(subs.iter().map(|s| &s.feature), x);
                if let Some(i) = closest {
                    if subs[i].feature.radius_with(x) <= self.threshold {
                        subs[i].feature.add(&Feature::of_point(x));
                        return (subs[i].id, None);
                    }
                }
                let id = self.next_id;
                self.next_id += 1;
                subs.push(Subcluster {
                    id,
                    feature: Feature::of_point(x),
                });
                if subs.len() > self.branching {
                    let (keep, split) = split_by_seeds(std::mem::take(subs), |s| &s.feature);
                    *subs = keep;
                    return (id, Some(Node::Leaf(split)));
                }
                (id, None)
            }
            Node::Inner(children) => {
                let i = closest_index(children.iter().map(|c| &c.0), x).expect("inner nodes are non-empty");
                let (id, split) = self.insert(&mut children[i].1, x);
                children[i].0.add(&Feature::of_point(x));
                if let Some(sibling) = split {
                    children[i].0 = self.summarize(&children[i].1);
                    let f = self.summarize(&sibling);
                    children.push((f, sibling));
                    if children.len() > self.branching {
                        let (keep, split) = split_by_seeds(std::mem::take(children), |c| &c.0);
                        *children = keep;
                        return (id, Some(Node::Inner(split)));
                    }
                }
                (id, None)
            }
        }
    }

    fn summarize(&self, node: &Node) -> Feature {
        let mut f = Feature::empty(self.dim);
        match node {
            Node::Leaf(subs) => subs.iter().for_each(|s| f.add(&s.feature)),
            Node::Inner(children) => children.iter().for_each(|c| f.add(&c.0)),
        }
        f
    }
}

fn closest_index<'a>(features: impl Iterator<Item = &'a Feature>, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in features.enumerate() {
        let d = f.sq_dist_to(x);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Splits around the two entries with the farthest-apart centroids.
fn split_by_seeds<T>(entries: Vec<T>, feature: impl Fn(&T) -> &Feature) -> (Vec<T>, Vec<T>) {
    let centroids: Vec<Vec<f64>> = entries.iter().map(|e| feature(e).centroid()).collect();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let (mut s1, mut s2, mut far) = (0, 1, -1.0);
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let d = sq(&centroids[i], &centroids[j]);
            if d > far {
                (s1, s2, far) = (i, j, d);
            }
        }
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, e) in entries.into_iter().enumerate() {
        let to_right = i == s2
            || (i != s1 && sq(&centroids[i], &centroids[s2]) < sq(&centroids[i], &centroids[s1]));
        if to_right {
            right.push(e);
        } else {
            left.push(e);
        }
    }
    (left, right)
}

fn collect_leaves(node: &Node, out: &mut Vec<Subcluster>) {
    match node {
        Node::Leaf(subs) => out.extend(subs.iter().cloned()),
        Node::Inner(children) => children.iter().for_each(|c| collect_leaves(&c.1, out)),
    }
}

/// Leaf subcluster of every point plus the subcluster centroids and sizes,
/// subclusters numbered by creation order.
pub fn birch_subclusters(
    points: ArrayView2<f32>,
    threshold: f64,
    branching: usize,
) -> Result<(Vec<usize>, Array2<f32>, Vec<f64>)> {
    if !(threshold > 0.0) {
        return Err(LexiconError::Argument(format!(
            "BIRCH threshold must be positive, got {threshold}"
        )));
    }
    if branching < 2 {
        return Err(LexiconError::Argument(format!(
            "BIRCH branching factor must be at least 2, got {branching}"
        )));
    }
    let dim = points.ncols();
    let mut tree = Tree {
        threshold,
        branching,
        dim,
        next_id: 0,
    };
    let mut root = Node::Leaf(Vec::new());
    let mut assignment = Vec::with_capacity(points.nrows());
    for row in points.outer_iter() {
        let x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
        let (id, split) = tree.insert(&mut root, &x);
        if let Some(sibling) = split {
            let old = std::mem::replace(&mut root, Node::Inner(Vec::new()));
            let (fa, fb) = (tree.summarize(&old), tree.summarize(&sibling));
            root = Node::Inner(vec![(fa, old), (fb, sibling)]);
        }
        assignment.push(id);
    }
    let mut leaves = Vec::new();
    collect_leaves(&root, &mut leaves);
    leaves.sort_by_key(|s| s.id);
    let mut centroids = Array2::<f32>::zeros((leaves.len(), dim));
    let mut sizes = Vec::with_capacity(leaves.len());
    for (row, s) in leaves.iter().enumerate() {
        for (j, c) in s.feature.centroid().into_iter().enumerate() {
            centroids[[row, j]] = c as f32;
        }
        sizes.push(s.feature.n);
    }
    Ok((assignment, centroids, sizes))
}

/// BIRCH with a global Ward phase over leaf subclusters to reach `k` clusters.
///
/// When the tree holds fewer than `k` subclusters every subcluster becomes its
/// own cluster.
pub fn birch(points: ArrayView2<f32>, config: &BirchConfig) -> Result<Vec<usize>> {
    let n = points.nrows();
    if config.k == 0 || config.k > n {
        return Err(LexiconError::Argument(format!(
            "BIRCH needs 1 <= k <= n, got k={}, n={n}",
            config.k
        )));
    }
    let (assignment, centroids, sizes) = birch_subclusters(points, config.threshold, config.branching)?;
    let m = centroids.nrows();
    if m < config.k {
        log::warn!("BIRCH produced {m} subclusters, fewer than the requested {}", config.k);
    }
    let merges = ward_linkage(centroids.view(), Some(&sizes))?;
    let sub_labels = cut_dendrogram(m, &merges, config.k.min(m));
    let labels: Vec<usize> = assignment.iter().map(|&s| sub_labels[s]).collect();
    Ok(crate::io::canonicalize(&labels).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn large_threshold_absorbs_everything() {
        let pts = array![[0.0f32, 0.0], [0.1, 0.0], [0.0, 0.2], [0.3, 0.3]];
        let labels = birch(pts.view(), &BirchConfig { threshold: 10.0, branching: 50, k: 1 }).unwrap();
        assert_eq!(labels, vec![0; 4]);
        let (_, centroids, sizes) = birch_subclusters(pts.view(), 10.0, 50).unwrap();
        assert_eq!(centroids.nrows(), 1);
        assert_eq!(sizes, vec![4.0]);
    }

    #[test]
    fn distant_points_stay_singletons() {
        let pts = array![[0.0f32], [3.0], [6.0], [9.0], [12.0]];
        let labels = birch(pts.view(), &BirchConfig { threshold: 0.25, branching: 2, k: 5 }).unwrap();
        assert_eq!(labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn splits_keep_every_subcluster() {
        let pts = Array2::from_shape_fn((200, 1), |(i, _)| i as f32);
        let (assignment, centroids, sizes) = birch_subclusters(pts.view(), 0.25, 3).unwrap();
        assert_eq!(centroids.nrows(), 200);
        assert_eq!(sizes.iter().sum::<f64>(), 200.0);
        for (i, &a) in assignment.iter().enumerate() {
            assert_eq!(centroids[[a, 0]], i as f32);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let pts = array![[0.0f32]];
        assert!(birch(pts.view(), &BirchConfig { threshold: 0.0, branching: 50, k: 1 }).is_err());
        assert!(birch(pts.view(), &BirchConfig::new(2)).is_err());
    }

    #[test]
    fn two_blobs_match_kmeans() {
        use crate::cluster::kmeans::{kmeans, KMeansConfig};
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::seed::rng_from_seed(12);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let data: Vec<f32> = (0..120)
            .flat_map(|i| {
                let c = if i % 2 == 0 { -2.0 } else { 2.0 };
                [c + noise.sample(&mut rng), noise.sample(&mut rng)]
            })
            .map(|v: f64| v as f32)
            .collect();
        let pts = Array2::from_shape_vec((120, 2), data).unwrap();
        let b = birch(pts.view(), &BirchConfig::new(2)).unwrap();
        let (_, k) = kmeans(pts.view(), &KMeansConfig::new(2, 1)).unwrap();
        assert_eq!(b, crate::io::canonicalize(&k).0);
        assert_eq!(b.iter().filter(|&&l| l == 0).count(), 60);
    }
}
