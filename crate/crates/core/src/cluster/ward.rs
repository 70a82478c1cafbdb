//! Ward agglomeration via the nearest-neighbor chain.

use ndarray::ArrayView2;

use crate::error::{LexiconError, Result};

/// One agglomeration step. `a` and `b` are the slots (original point indices)
/// standing for the two merged clusters; the merged cluster keeps slot `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Increase of the within-cluster sum of squares caused by the merge.
    pub cost: f64,
}

struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.index(i, j);
        self.data[idx] = v;
    }
}

/// Full Ward dendrogram, merges sorted by cost (stable for ties).
///
/// `weights` gives each point an initial cluster size, which lets weighted
/// centroids (e.g. BIRCH subclusters) be agglomerated as if their members were
/// present. Unit weights when `None`.
pub fn ward_linkage(points: ArrayView2<f32>, weights: Option<&[f64]>) -> Result<Vec<Merge>> {
    let n = points.nrows();
    let sizes: Vec<f64> = match weights {
        Some(w) if w.len() != n => {
            return Err(LexiconError::Argument(format!(
                "{} weights for {n} points",
                w.len()
            )))
        }
        Some(w) if w.iter().any(|&x| !(x > 0.0)) => {
            return Err(LexiconError::Argument("Ward weights must be positive".into()))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    if n < 2 {
        return Ok(Vec::new());
    }
    let points = points.as_standard_layout();
    let mut dist = Condensed {
        n,
        data: vec![0.0; n * (n - 1) / 2],
    };
    for i in 0..n {
        let xi = points.row(i);
        for j in i + 1..n {
            let sq: f64 = xi
                .iter()
                .zip(points.row(j))
                .map(|(&a, &b)| {
                    let d = f64::from(a) - f64::from(b);
                    d * d
                })
                .sum();
            dist.set(i, j, sizes[i] * sizes[j] / (sizes[i] + sizes[j]) * sq);
        }
    }
    let mut size = sizes;
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n - 1);

    while merges.len() < n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        let (a, b) = loop {
            let tip = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // prefer the previous chain element on ties so the chain terminates
            let mut best = prev.map(|p| (p, dist.get(tip, p)));
            for (x, &alive) in active.iter().enumerate() {
                if !alive || x == tip {
                    continue;
                }
                let d = dist.get(tip, x);
                match best {
                    Some((_, bd)) if d >= bd => {}
                    _ => best = Some((x, d)),
                }
            }
            let (next, _) = best.expect("at least two active clusters");
            if Some(next) == prev {
                chain.pop();
                chain.pop();
                break (tip.min(next), tip.max(next));
            }
            chain.push(next);
        };

        let cost = dist.get(a, b);
        let (na, nb) = (size[a], size[b]);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k];
            // Lance-Williams update for Ward
            let updated = ((na + nk) * dist.get(k, a) + (nb + nk) * dist.get(k, b) - nk * cost)
                / (na + nb + nk);
            dist.set(k, b, updated);
        }
        active[a] = false;
        size[b] = na + nb;
        merges.push(Merge { a, b, cost });
    }
    merges.sort_by(|x, y| x.cost.total_cmp(&y.cost));
    Ok(merges)
}

/// Applies the cheapest `n - k` merges and returns canonical cluster labels.
pub fn cut_dendrogram(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in merges.iter().take(n.saturating_sub(k)) {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        parent[ra] = rb;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    crate::io::canonicalize(&roots).0
}

/// Ward agglomerative clustering cut at exactly `k` clusters.
pub fn agglomerative_ward(points: ArrayView2<f32>, k: usize) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(LexiconError::Argument(format!(
            "agglomerative clustering needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let merges = ward_linkage(points, None)?;
    Ok(cut_dendrogram(n, &merges, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sse(points: &Array2<f32>, labels: &[usize]) -> f64 {
        let k = labels.iter().max().unwrap() + 1;
        let d = points.ncols();
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            let mut centroid = vec![0.0; d];
            for &i in &members {
                for j in 0..d {
                    centroid[j] += f64::from(points[[i, j]]) / members.len() as f64;
                }
            }
            for &i in &members {
                for j in 0..d {
                    total += (f64::from(points[[i, j]]) - centroid[j]).powi(2);
                }
            }
        }
        total
    }

    /// Naive greedy Ward: at each step merge the pair of current clusters whose
    /// union increases the total SSE least, recomputing from raw points.
    fn greedy_ward(points: &Array2<f32>) -> Vec<Vec<usize>> {
        let n = points.nrows();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut cuts = vec![labels_of(&clusters, n)];
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut merged = clusters.clone();
                    let b = merged.remove(j);
                    merged[i].extend(b);
                    let cost = sse(points, &labels_of(&merged, n));
                    if cost < best.0 {
                        best = (cost, i, j);
                    }
                }
            }
            let b = clusters.remove(best.2);
            clusters[best.1].extend(b);
            cuts.push(labels_of(&clusters, n));
        }
        cuts.reverse();
        cuts // cuts[k - 1] has k clusters
    }

    fn labels_of(clusters: &[Vec<usize>], n: usize) -> Vec<usize> {
        let mut labels = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        crate::io::canonicalize(&labels).0
    }

    #[test]
    fn four_points_on_a_line() {
        let pts = array![[0.0f32], [1.0], [10.0], [11.0]];
        assert_eq!(agglomerative_ward(pts.view(), 2).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(agglomerative_ward(pts.view(), 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(agglomerative_ward(pts.view(), 1).unwrap(), vec![0; 4]);
        assert!(agglomerative_ward(pts.view(), 5).is_err());
    }

    #[test]
    fn merge_costs_are_sse_increments() {
        let pts = array![[0.0f32], [1.0], [10.0], [11.0]];
        let merges = ward_linkage(pts.view(), None).unwrap();
        let costs: Vec<f64> = merges.iter().map(|m| m.cost).collect();
        // {0,1}: 0.5, {10,11}: 0.5, then the two pairs: 2*2/4 * 10^2 = 100
        assert_eq!(costs, vec![0.5, 0.5, 100.0]);
    }

    #[test]
    fn matches_greedy_sse_merging_on_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.random_range(2..=8);
            let data: Vec<f32> = (0..n * 2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let pts = Array2::from_shape_vec((n, 2), data).unwrap();
            let oracle = greedy_ward(&pts);
            let merges = ward_linkage(pts.view(), None).unwrap();
            for k in 1..=n {
                assert_eq!(cut_dendrogram(n, &merges, k), oracle[k - 1], "n={n} k={k}");
            }
        }
    }

    #[test]
    fn weights_act_like_repeated_points() {
        let pts = array![[0.0f32], [1.0], [5.0]];
        let repeated = array![[0.0f32], [0.0], [0.0], [1.0], [5.0]];
        let w = ward_linkage(pts.view(), Some(&[3.0, 1.0, 1.0])).unwrap();
        let r = ward_linkage(repeated.view(), None).unwrap();
        let last_w: Vec<f64> = w.iter().map(|m| m.cost).collect();
        let last_r: Vec<f64> = r.iter().skip(2).map(|m| m.cost).collect();
        for (a, b) in last_w.iter().zip(&last_r) {
            assert!((a - b).abs() < 1e-9, "{last_w:?} vs {last_r:?}");
        }
    }

    #[test]
    fn permuting_input_permutes_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 30;
        let data: Vec<f32> = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pts = Array2::from_shape_vec((n, 3), data).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled = pts.select(ndarray::Axis(0), &perm);
        for k in [1, 3, 7, 30] {
            let a = agglomerative_ward(pts.view(), k).unwrap();
            let b = agglomerative_ward(shuffled.view(), k).unwrap();
            let back: Vec<usize> = (0..n).map(|i| b[perm.iter().position(|&p| p == i).unwrap()]).collect();
            assert_eq!(a, crate::io::canonicalize(&back).0);
        }
    }
}
