//! Threshold similarity graphs and the constant Potts model objective.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{DistanceKind, DistanceTable, ItemSet};
use crate::error::{LexiconError, Result};

/// Default thresholds per distance kind.
pub fn default_threshold(kind: DistanceKind) -> f64 {
    match kind {
        DistanceKind::Edit => 0.65,
        DistanceKind::Cosine => 0.4,
        DistanceKind::Dtw => 0.35,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub weight: f64,
}

/// Undirected weighted graph over items; edge `(i, j)` exists iff their
/// distance is at most the threshold, with weight `1 - distance`.
/// Edges are stored once with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub threshold: f64,
    pub kind: DistanceKind,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(LexiconError::Argument(format!(
            "graph threshold must be a finite non-negative number, got {threshold}"
        )));
    }
    Ok(())
}

/// Distances at or beyond 1 would give non-positive weights and never become edges.
fn edge_for(i: usize, j: usize, distance: f64, threshold: f64) -> Option<Edge> {
    (distance <= threshold && distance < 1.0).then_some(Edge {
        i: i as u32,
        j: j as u32,
        weight: 1.0 - distance,
    })
}

impl SimilarityGraph {
    pub fn edgeless(n: usize, kind: DistanceKind) -> Self {
        Self {
            n,
            edges: Vec::new(),
            threshold: 0.0,
            kind,
        }
    }

    /// Builds a graph from explicit edges (tests, external graphs). Edges are
    /// normalized to `i < j` and sorted; self-loops and duplicates are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], kind: DistanceKind) -> Result<Self> {
        let mut out = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            if a == b || a >= n || b >= n {
                return Err(LexiconError::Argument(format!("invalid edge ({a}, {b}) for {n} nodes")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(LexiconError::Argument(format!("edge weight {w} outside (0, 1]")));
            }
            out.push(Edge {
                i: a.min(b) as u32,
                j: a.max(b) as u32,
                weight: w,
            });
        }
        out.sort_by_key(|e| (e.i, e.j));
        if out.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(LexiconError::Argument("duplicate edge".into()));
        }
        Ok(Self {
            n,
            edges: out,
            threshold: 1.0,
            kind,
        })
    }

    /// Neighbor lists (both directions), each sorted by neighbor index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i as usize].push((e.j as usize, e.weight));
            adj[e.j as usize].push((e.i as usize, e.weight));
        }
        adj.iter_mut().for_each(|a| a.sort_by_key(|&(v, _)| v));
        adj
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Connected-component label of every node, canonical order.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e.i as usize);
            let b = find(&mut parent, e.j as usize);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..self.n).map(|v| find(&mut parent, v)).collect();
        crate::io::canonicalize(&roots).0
    }
}

/// Threshold graph computed row by row without materializing the distance
/// table. Rows run in parallel; the edge list does not depend on scheduling.
pub fn build_graph(items: &ItemSet, threshold: f64) -> Result<SimilarityGraph> {
    check_threshold(threshold)?;
    let rows: Vec<Vec<Edge>> = (0..items.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..items.len())
                .filter_map(|j| edge_for(i, j, items.distance(i, j), threshold))
                .collect()
        })
        .collect();
    Ok(SimilarityGraph {
        n: items.len(),
        edges: rows.concat(),
        threshold,
        kind: items.kind(),
    })
}

/// Filters a materialized distance table.
pub fn graph_from_table(table: &DistanceTable, threshold: f64) -> Result<SimilarityGraph> {
    check_threshold(threshold)?;
    let n = table.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.extend(edge_for(i, j, table.get(i, j), threshold));
        }
    }
    Ok(SimilarityGraph {
        n,
        edges,
        threshold,
        kind: table.kind(),
    })
}

/// Adds items one at a time, connecting each newcomer to every earlier item
/// within the threshold.
pub struct IncrementalGraphBuilder<'a> {
    items: &'a ItemSet,
    threshold: f64,
    added: usize,
    edges: Vec<Edge>,
}

impl<'a> IncrementalGraphBuilder<'a> {
    pub fn new(items: &'a ItemSet, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            items,
            threshold,
            added: 0,
            edges: Vec::new(),
        })
    }

    /// Inserts the next item; returns `false` once all items are in.
    pub fn push_next(&mut self) -> bool {
        if self.added == self.items.len() {
            return false;
        }
        let v = self.added;
        for u in 0..v {
            self.edges
                .extend(edge_for(u, v, self.items.distance(u, v), self.threshold));
        }
        self.added += 1;
        true
    }

    pub fn finish(mut self) -> SimilarityGraph {
        while self.push_next() {}
        self.edges.sort_by_key(|e| (e.i, e.j));
        SimilarityGraph {
            n: self.items.len(),
            edges: self.edges,
            threshold: self.threshold,
            kind: self.items.kind(),
        }
    }
}

/// Constant Potts model quality `sum_c [w_c - gamma * n_c (n_c - 1) / 2]`.
pub fn cpm_quality(graph: &SimilarityGraph, membership: &[usize], gamma: f64) -> f64 {
    assert_eq!(membership.len(), graph.n, "partition must cover the graph");
    let mut internal = 0.0;
    for e in &graph.edges {
        if membership[e.i as usize] == membership[e.j as usize] {
            internal += e.weight;
        }
    }
    let mut sizes: HashMap<usize, f64> = HashMap::new();
    for &c in membership {
        *sizes.entry(c).or_default() += 1.0;
    }
    let pairs: f64 = sizes.values().map(|&s| s * (s - 1.0) / 2.0).sum();
    internal - gamma * pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::WordEmbedding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_embeddings(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<WordEmbedding> {
        (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                WordEmbedding {
                    segment_id: format!("e{i}"),
                    vector: crate::transform::unit_vector(&v).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn zero_threshold_on_distinct_items_is_edgeless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let items = ItemSet::embeddings(&random_embeddings(&mut rng, 10, 4)).unwrap();
        let g = build_graph(&items, 0.0).unwrap();
        assert!(g.edges.is_empty());
        assert!(build_graph(&items, -0.1).is_err());
    }

    #[test]
    fn duplicates_get_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut e = random_embeddings(&mut rng, 3, 4);
        e.push(e[1].clone());
        let g = build_graph(&ItemSet::embeddings(&e).unwrap(), 0.01).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!((g.edges[0].i, g.edges[0].j), (1, 3));
        assert!((g.edges[0].weight - 1.0).abs() < 1e-6);
    }

    #[test]
    fn edges_match_brute_force_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_embeddings(&mut rng, 5, 3);
        let g = build_graph(&ItemSet::embeddings(&e).unwrap(), 0.4).unwrap();
        let mut want = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                let d = crate::distance::cosine_distance(&e[i].vector, &e[j].vector).unwrap();
                if d <= 0.4 {
                    want.push((i as u32, j as u32, 1.0 - d));
                }
            }
        }
        let got: Vec<(u32, u32, f64)> = g.edges.iter().map(|e| (e.i, e.j, e.weight)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn incremental_batch_and_table_builds_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 17, 120, 500] {
            let items = ItemSet::embeddings(&random_embeddings(&mut rng, n, 3)).unwrap();
            let batch = build_graph(&items, 0.4).unwrap();
            let incremental = IncrementalGraphBuilder::new(&items, 0.4).unwrap().finish();
            let table = crate::distance::pairwise_distances(&items, usize::MAX).unwrap();
            assert_eq!(batch, incremental);
            assert_eq!(batch, graph_from_table(&table, 0.4).unwrap());
            assert!(batch.edges.iter().all(|e| e.i < e.j && e.weight > 0.0 && e.weight <= 1.0));
        }
    }

    #[test]
    fn cpm_quality_examples() {
        let g = SimilarityGraph::from_edges(2, &[(0, 1, 1.0)], DistanceKind::Cosine).unwrap();
        assert_eq!(cpm_quality(&g, &[0, 1], 0.5), 0.0);
        assert_eq!(cpm_quality(&g, &[0, 0], 0.5), 0.5);
        let empty = SimilarityGraph::edgeless(5, DistanceKind::Cosine);
        // communities of sizes 3 and 2: pairs 3 + 1
        assert_eq!(cpm_quality(&empty, &[0, 0, 0, 1, 1], 0.25), -1.0);
        assert_eq!(cpm_quality(&empty, &[0, 1, 2, 3, 4], 0.25), 0.0);
    }

    #[test]
    fn from_edges_validates() {
        assert!(SimilarityGraph::from_edges(2, &[(0, 0, 1.0)], DistanceKind::Edit).is_err());
        assert!(SimilarityGraph::from_edges(2, &[(0, 1, 1.0), (1, 0, 0.5)], DistanceKind::Edit).is_err());
        assert!(SimilarityGraph::from_edges(2, &[(0, 1, 0.0)], DistanceKind::Edit).is_err());
    }

    #[test]
    fn components_follow_edges() {
        let g = SimilarityGraph::from_edges(5, &[(3, 4, 0.5), (0, 2, 0.5)], DistanceKind::Edit).unwrap();
        assert_eq!(g.components(), vec![0, 1, 0, 2, 2]);
    }
}
