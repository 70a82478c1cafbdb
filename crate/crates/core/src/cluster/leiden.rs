//! Leiden community detection under the constant Potts model.
//!
//! Each iteration runs fast local moving, refines every community into
//! well-connected subcommunities, aggregates the graph by the refined partition
//! and repeats on the aggregate. Iterations continue from the original graph
//! until one of them accepts no move, so the result is node-optimal: no single
//! node can change community and improve the quality.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{cpm_quality, SimilarityGraph};
use crate::error::{LexiconError, Result};
use crate::io::canonicalize;
use crate::seed::rng_from_seed;

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeidenConfig {
    pub gamma: f64,
    pub seed: u64,
    /// Temperature of the randomized merge choice during refinement.
    pub randomness: f64,
    pub max_iterations: usize,
}

impl LeidenConfig {
    pub fn new(gamma: f64, seed: u64) -> Self {
        Self {
            gamma,
            seed,
            randomness: 0.01,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeidenOutcome {
    /// Canonical community label per node.
    pub membership: Vec<usize>,
    pub n_communities: usize,
    pub quality: f64,
    pub iterations: usize,
    /// Accepted node moves across all levels and iterations.
    pub moves: usize,
    /// Membership of the original nodes after every accepted move, starting with
    /// the initial partition. Only recorded on request.
    pub trace: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone)]
struct Network {
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    size: Vec<f64>,
}

impl Network {
    fn from_graph(graph: &SimilarityGraph) -> Self {
        Self {
            adj: graph.adjacency(),
            self_weight: vec![0.0; graph.n],
            size: vec![1.0; graph.n],
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each refined community into one node. Returns the aggregate
    /// network and the node -> aggregate-node map.
    fn aggregate(&self, refined: &[usize]) -> (Network, Vec<usize>) {
        let (map, m) = canonicalize(refined);
        let mut size = vec![0.0; m];
        let mut self_weight = vec![0.0; m];
        let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for u in 0..self.n() {
            let a = map[u];
            size[a] += self.size[u];
            self_weight[a] += self.self_weight[u];
            for &(v, w) in &self.adj[u] {
                let b = map[v];
                if a != b {
                    acc[a].push((b, w));
                } else if u < v {
                    self_weight[a] += w;
                }
            }
        }
        let adj = acc
            .into_iter()
            .map(|mut list| {
                list.sort_by_key(|&(b, _)| b);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
                for (b, w) in list {
                    match merged.last_mut() {
                        Some(last) if last.0 == b => last.1 += w,
                        _ => merged.push((b, w)),
                    }
                }
                merged
            })
            .collect();
        (
            Network {
                adj,
                self_weight,
                size,
            },
            map,
        )
    }
}

struct Tracer<'a> {
    log: Option<&'a mut Vec<Vec<usize>>>,
    node_map: &'a [usize],
}

impl Tracer<'_> {
    fn record(&mut self, membership: &[usize]) {
        if let Some(log) = self.log.as_deref_mut() {
            log.push(self.node_map.iter().map(|&a| membership[a]).collect());
        }
    }
}

/// Queue-based local moving. Every accepted move strictly increases quality.
fn move_nodes(
    net: &Network,
    membership: &mut [usize],
    gamma: f64,
    rng: &mut ChaCha8Rng,
    tracer: &mut Tracer<'_>,
) -> usize {
    let n = net.n();
    let mut comm_size = vec![0.0; n];
    let mut comm_nodes = vec![0usize; n];
    for v in 0..n {
        comm_size[membership[v]] += net.size[v];
        comm_nodes[membership[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| comm_nodes[c] == 0).rev().collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut in_queue = vec![true; n];
    let mut neigh_w = vec![0.0; n];
    let mut touched_flag = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moves = 0;

    while let Some(v) = queue.pop_front() {
        in_queue[v] = false;
        let cur = membership[v];
        for &(u, w) in &net.adj[v] {
            let c = membership[u];
            if !touched_flag[c] {
                touched_flag[c] = true;
                touched.push(c);
            }
            neigh_w[c] += w;
        }
        let sv = net.size[v];
        let w_cur = neigh_w[cur];
        let rest_cur = comm_size[cur] - sv;
        let mut best = cur;
        let mut best_gain = 0.0;
        for &c in &touched {
            if c == cur {
                continue;
            }
            let gain = neigh_w[c] - w_cur - gamma * sv * (comm_size[c] - rest_cur);
            if gain > best_gain {
                best = c;
                best_gain = gain;
            }
        }
        if comm_nodes[cur] > 1 {
            if let Some(&e) = empty.last() {
                let gain = gamma * sv * rest_cur - w_cur;
                if gain > best_gain {
                    best = e;
                    best_gain = gain;
                }
            }
        }
        for &c in &touched {
            neigh_w[c] = 0.0;
            touched_flag[c] = false;
        }
        touched.clear();

        if best != cur && best_gain > MIN_GAIN {
            if empty.last() == Some(&best) {
                empty.pop();
            }
            comm_size[cur] -= sv;
            comm_nodes[cur] -= 1;
            if comm_nodes[cur] == 0 {
                empty.push(cur);
            }
            comm_size[best] += sv;
            comm_nodes[best] += 1;
            membership[v] = best;
            moves += 1;
            tracer.record(membership);
            for &(u, _) in &net.adj[v] {
                if !in_queue[u] && membership[u] != best {
                    in_queue[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    moves
}

/// Splits every community of `membership` into well-connected subcommunities by
/// merging singletons, starting from the all-singleton partition.
fn refine(
    net: &Network,
    membership: &[usize],
    gamma: f64,
    randomness: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = net.n();
    let mut comm_total = vec![0.0; n];
    for v in 0..n {
        comm_total[membership[v]] += net.size[v];
    }
    let mut refined: Vec<usize> = (0..n).collect();
    let mut r_size = net.size.clone();
    let mut r_count = vec![1usize; n];
    // weight from each refined community to the rest of its parent community
    let mut external: Vec<f64> = (0..n)
        .map(|v| {
            net.adj[v]
                .iter()
                .filter(|&&(u, _)| membership[u] == membership[v])
                .map(|&(_, w)| w)
                .sum()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut neigh_w = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();

    for v in order {
        let own = refined[v];
        if r_count[own] != 1 {
            continue;
        }
        let c = membership[v];
        let sv = net.size[v];
        if external[own] < gamma * sv * (comm_total[c] - sv) {
            continue;
        }
        for &(u, w) in &net.adj[v] {
            if membership[u] != c {
                continue;
            }
            let t = refined[u];
            if t == own {
                continue;
            }
            if neigh_w[t] == 0.0 {
                touched.push(t);
            }
            neigh_w[t] += w;
        }
        candidates.clear();
        for &t in &touched {
            let well_connected = external[t] >= gamma * r_size[t] * (comm_total[c] - r_size[t]);
            let gain = neigh_w[t] - gamma * sv * r_size[t];
            if well_connected && gain >= 0.0 {
                candidates.push((t, gain, neigh_w[t]));
            }
        }
        for &t in &touched {
            neigh_w[t] = 0.0;
        }
        touched.clear();
        if candidates.is_empty() {
            continue;
        }
        let top = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = candidates
            .iter()
            .map(|c| ((c.1 - top) / randomness).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = candidates.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        let (t, _, w_vt) = candidates[pick];
        external[t] += external[own] - 2.0 * w_vt;
        r_size[t] += sv;
        r_count[t] += 1;
        r_count[own] = 0;
        refined[v] = t;
    }
    refined
}

/// One multilevel pass starting from `membership` on the original graph.
/// Returns the number of accepted moves.
fn run_iteration(
    base: &Network,
    membership: &mut Vec<usize>,
    config: &LeidenConfig,
    rng: &mut ChaCha8Rng,
    trace: &mut Option<Vec<Vec<usize>>>,
) -> usize {
    let mut net = base.clone();
    let mut part = canonicalize(membership).0;
    let mut node_map: Vec<usize> = (0..base.n()).collect();
    let mut moves = 0;
    loop {
        let mut tracer = Tracer {
            log: trace.as_mut(),
            node_map: &node_map,
        };
        moves += move_nodes(&net, &mut part, config.gamma, rng, &mut tracer);
        let (dense, n_comms) = canonicalize(&part);
        part = dense;
        if n_comms == net.n() {
            break;
        }
        let mut refined = refine(&net, &part, config.gamma, config.randomness, rng);
        if canonicalize(&refined).1 == net.n() {
            // refinement merged nothing; aggregate by the communities themselves
            refined = part.clone();
        }
        let (agg, map) = net.aggregate(&refined);
        let mut agg_part = vec![0; agg.n()];
        for v in 0..net.n() {
            agg_part[map[v]] = part[v];
        }
        node_map.iter_mut().for_each(|a| *a = map[*a]);
        net = agg;
        part = agg_part;
    }
    *membership = node_map.iter().map(|&a| part[a]).collect();
    moves
}

/// Splits communities that are not connected in the graph. Never lowers quality.
fn split_disconnected(graph: &SimilarityGraph, membership: &[usize]) -> Vec<usize> {
    let adj = graph.adjacency();
    let mut label = vec![usize::MAX; graph.n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..graph.n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if label[u] == usize::MAX && membership[u] == membership[start] {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    label
}

/// Leiden partition of `graph`, optionally starting from `initial`.
pub fn leiden(
    graph: &SimilarityGraph,
    config: &LeidenConfig,
    initial: Option<&[usize]>,
) -> Result<LeidenOutcome> {
    leiden_impl(graph, config, initial, false)
}

/// As [`leiden`], additionally recording the partition after every accepted move.
pub fn leiden_traced(
    graph: &SimilarityGraph,
    config: &LeidenConfig,
    initial: Option<&[usize]>,
) -> Result<LeidenOutcome> {
    leiden_impl(graph, config, initial, true)
}

fn leiden_impl(
    graph: &SimilarityGraph,
    config: &LeidenConfig,
    initial: Option<&[usize]>,
    record: bool,
) -> Result<LeidenOutcome> {
    if !(config.gamma > 0.0) || !config.gamma.is_finite() {
        return Err(LexiconError::Argument(format!(
            "CPM resolution must be positive, got {}",
            config.gamma
        )));
    }
    if !(config.randomness > 0.0) {
        return Err(LexiconError::Argument("refinement randomness must be positive".into()));
    }
    let mut membership = match initial {
        Some(init) if init.len() != graph.n => {
            return Err(LexiconError::Argument(format!(
                "initial partition covers {} nodes, graph has {}",
                init.len(),
                graph.n
            )))
        }
        Some(init) => canonicalize(init).0,
        None => (0..graph.n).collect(),
    };
    let mut trace = record.then(|| vec![membership.clone()]);
    let base = Network::from_graph(graph);
    let mut rng = rng_from_seed(config.seed);
    let mut moves = 0;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let accepted = run_iteration(&base, &mut membership, config, &mut rng, &mut trace);
        moves += accepted;
        if accepted == 0 {
            break;
        }
    }
    let (membership, n_communities) = canonicalize(&split_disconnected(graph, &membership));
    let quality = cpm_quality(graph, &membership, config.gamma);
    Ok(LeidenOutcome {
        membership,
        n_communities,
        quality,
        iterations,
        moves,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    pub gamma: f64,
    pub n_clusters: usize,
    /// Whether the returned gamma hits the target count exactly.
    pub reached: bool,
    pub evaluations: usize,
}

pub const DEFAULT_GAMMA_STEPS: usize = 40;
const GAMMA_FLOOR: f64 = 1e-7;

/// Searches for the resolution whose Leiden partition has `target_k` communities.
///
/// Community count grows with gamma (for CPM, gamma >= 1 with weights in (0, 1]
/// yields singletons), so the search brackets the target and bisects in log
/// space. Returns the best gamma seen once the step budget runs out.
pub fn tune_gamma(
    graph: &SimilarityGraph,
    target_k: usize,
    seed: u64,
    max_steps: usize,
) -> Result<GammaSearch> {
    if target_k == 0 {
        return Err(LexiconError::Argument("target cluster count must be positive".into()));
    }
    if graph.edges.is_empty() {
        if target_k != graph.n {
            log::warn!("edgeless graph always yields {} clusters; target {target_k} unreachable", graph.n);
        }
        return Ok(GammaSearch {
            gamma: 1.0,
            n_clusters: graph.n,
            reached: target_k == graph.n,
            evaluations: 0,
        });
    }
    let mut evaluations = 0;
    let mut count = |gamma: f64| -> Result<usize> {
        evaluations += 1;
        Ok(leiden(graph, &LeidenConfig::new(gamma, seed), None)?.n_communities)
    };
    let mut best = (usize::MAX, 0.0, 0usize);
    let consider = |gamma: f64, k: usize, best: &mut (usize, f64, usize)| {
        let err = k.abs_diff(target_k);
        if err < best.0 || (err == best.0 && gamma < best.1) {
            *best = (err, gamma, k);
        }
    };

    let (mut lo, mut hi) = (GAMMA_FLOOR, 1.0);
    let k_lo = count(lo)?;
    consider(lo, k_lo, &mut best);
    let mut steps = 1;
    if k_lo < target_k {
        let mut k_hi = count(hi)?;
        consider(hi, k_hi, &mut best);
        steps += 1;
        while k_hi < target_k && steps < max_steps {
            lo = hi;
            hi *= 2.0;
            k_hi = count(hi)?;
            consider(hi, k_hi, &mut best);
            steps += 1;
        }
        while best.0 != 0 && steps < max_steps {
            let mid = (lo * hi).sqrt();
            let k_mid = count(mid)?;
            consider(mid, k_mid, &mut best);
            steps += 1;
            if k_mid < target_k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let (err, gamma, n_clusters) = best;
    if err != 0 {
        log::warn!("gamma search ended at {n_clusters} clusters for target {target_k}");
    }
    Ok(GammaSearch {
        gamma,
        n_clusters,
        reached: err == 0,
        evaluations,
    })
}
