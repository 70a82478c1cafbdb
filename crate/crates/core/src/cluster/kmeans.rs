//! Lloyd's k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LexiconError, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 100,
            tol: 1e-4,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after every assignment step, the last entry being `inertia`.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(point: &[f32], centroid: &[f64]) -> f64 {
    point
        .iter()
        .zip(centroid)
        .map(|(&p, &c)| {
            let d = f64::from(p) - c;
            d * d
        })
        .sum()
}

/// Index and squared distance of the closest centroid; ties go to the lowest index.
pub fn nearest_centroid(point: &[f32], centroids: ArrayView2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(point, c.as_slice().expect("standard layout"));
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Squared distance of each point to its closest centroid (the k-means++ `D(x)^2`).
pub fn pp_weights(points: ArrayView2<f32>, centroids: &[Vec<f64>]) -> Vec<f64> {
    let points = points.as_standard_layout();
    points
        .outer_iter()
        .map(|p| {
            let p = p.as_slice().unwrap();
            centroids
                .iter()
                .map(|c| sq_dist(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// k-means++ seeding: first centroid uniform, then each next point drawn with
/// probability proportional to its squared distance from the nearest chosen centroid.
pub fn kmeans_pp_init(points: ArrayView2<f32>, k: usize, seed: u64) -> Result<Array2<f64>> {
    let (n, d) = points.dim();
    if k == 0 || n < k {
        return Err(LexiconError::Argument(format!(
            "k-means++ needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let points = points.as_standard_layout();
    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids: Vec<Vec<f64>> = vec![to_f64(points.row(first).as_slice().unwrap())];
    let mut weights: Vec<f64> = points
        .outer_iter()
        .map(|p| sq_dist(p.as_slice().unwrap(), &centroids[0]))
        .collect();
    weights[first] = 0.0;

    while centroids.len() < k {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = to_f64(points.row(pick).as_slice().unwrap());
        for (i, p) in points.outer_iter().enumerate() {
            let dd = sq_dist(p.as_slice().unwrap(), &c);
            if dd < weights[i] {
                weights[i] = dd;
            }
        }
        weights[pick] = 0.0;
        centroids.push(c);
    }

    let flat: Vec<f64> = centroids.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((k, d), flat).unwrap())
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(points: ArrayView2<f32>, config: &KMeansConfig) -> Result<(KMeansModel, Vec<usize>)> {
    let init = kmeans_pp_init(points, config.k, config.seed)?;
    lloyd(points, init, config.max_iter, config.tol)
}

/// Lloyd iterations from explicit starting centroids.
///
/// A cluster left empty by an assignment step seizes the point farthest from its
/// own centroid (among clusters with more than one member).
pub fn lloyd(
    points: ArrayView2<f32>,
    init: Array2<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<(KMeansModel, Vec<usize>)> {
    let (n, d) = points.dim();
    let k = init.nrows();
    if k == 0 || n < k {
        return Err(LexiconError::Argument(format!(
            "k-means needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if init.ncols() != d {
        return Err(LexiconError::DimensionMismatch {
            expected: d,
            found: init.ncols(),
            context: "initial centroids".into(),
        });
    }
    let points = points.as_standard_layout();
    let points = points.view();
    let mut centroids = init.as_standard_layout().into_owned();
    let mut history = Vec::new();
    let mut iterations_run = 0;

    for _ in 0..max_iter {
        let (mut labels, mut dists) = assign(&points, &centroids);
        repair_empty(&points, &mut centroids, &mut labels, &mut dists);
        history.push(dists.iter().sum());
        iterations_run += 1;

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut s = sums.row_mut(l);
            for (acc, &v) in s.iter_mut().zip(points.row(i)) {
                *acc += f64::from(v);
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for j in 0..d {
                let new = sums[[c, j]] * inv;
                let delta = new - centroids[[c, j]];
                moved += delta * delta;
                centroids[[c, j]] = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < tol {
            break;
        }
    }

    let (labels, dists) = assign(&points, &centroids);
    let inertia: f64 = dists.iter().sum();
    history.push(inertia);
    Ok((
        KMeansModel {
            centroids,
            inertia,
            iterations_run,
            inertia_history: history,
        },
        labels,
    ))
}

fn assign(points: &ArrayView2<f32>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let view = centroids.view();
    (0..points.nrows())
        .into_par_iter()
        .map(|i| nearest_centroid(points.row(i).to_slice().unwrap(), view))
        .unzip()
}

fn repair_empty(
    points: &ArrayView2<f32>,
    centroids: &mut Array2<f64>,
    labels: &mut [usize],
    dists: &mut [f64],
) {
    let k = centroids.nrows();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        let Some(p) = donor else { break };
        counts[labels[p]] -= 1;
        counts[c] = 1;
        labels[p] = c;
        dists[p] = 0.0;
        for (dst, &v) in centroids.row_mut(c).iter_mut().zip(points.row(p)) {
            *dst = f64::from(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(n_per: usize, seed: u64) -> (Array2<f32>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centres = [[-5.0f32, 0.0], [5.0, 1.0]];
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * n_per {
            let c = i % 2;
            data.push(centres[c][0] + noise.sample(&mut rng) as f32);
            data.push(centres[c][1] + noise.sample(&mut rng) as f32);
            labels.push(c);
        }
        (Array2::from_shape_vec((2 * n_per, 2), data).unwrap(), labels)
    }

    #[test]
    fn single_centroid_is_an_input_point() {
        let pts = array![[0.0f32, 1.0], [2.0, 3.0], [4.0, 5.0]];
        let c = kmeans_pp_init(pts.view(), 1, 3).unwrap();
        assert!(pts
            .outer_iter()
            .any(|p| p.iter().zip(c.row(0)).all(|(&a, &b)| f64::from(a) == b)));
    }

    #[test]
    fn k_equal_n_picks_every_point_once() {
        let pts = array![[0.0f32], [1.0], [10.0], [-3.0], [7.5]];
        for seed in 0..20 {
            let c = kmeans_pp_init(pts.view(), 5, seed).unwrap();
            let mut got: Vec<f64> = c.iter().copied().collect();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, vec![-3.0, 0.0, 1.0, 7.5, 10.0]);
        }
    }

    #[test]
    fn sampling_weights_follow_squared_distance() {
        let pts = array![[0.0f32], [1.0], [10.0]];
        let w = pp_weights(pts.view(), &[vec![0.0]]);
        assert_eq!(w, vec![0.0, 1.0, 100.0]);
        let p10 = w[2] / w.iter().sum::<f64>();
        assert!((p10 - 100.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn second_pick_frequency_matches_weights() {
        let pts = array![[0.0f32], [1.0], [10.0]];
        let (mut first_zero, mut then_ten) = (0usize, 0usize);
        for seed in 0..30_000u64 {
            let c = kmeans_pp_init(pts.view(), 2, seed).unwrap();
            if c[[0, 0]] == 0.0 {
                first_zero += 1;
                then_ten += usize::from(c[[1, 0]] == 10.0);
            }
        }
        let freq = then_ten as f64 / first_zero as f64;
        // binomial std at p = 100/101 over ~10k trials is ~0.001
        assert!((freq - 100.0 / 101.0).abs() < 0.006, "{freq}");
    }

    #[test]
    fn rejects_k_above_n() {
        let pts = array![[0.0f32]];
        assert!(kmeans_pp_init(pts.view(), 2, 0).is_err());
        assert!(kmeans(pts.view(), &KMeansConfig::new(2, 0)).is_err());
    }

    #[test]
    fn separates_two_blobs() {
        let (pts, truth) = blobs(50, 1);
        let (model, labels) = kmeans(pts.view(), &KMeansConfig::new(2, 4)).unwrap();
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                assert_eq!(labels[i] == labels[j], truth[i] == truth[j]);
            }
        }
        assert!(model.inertia > 0.0);
    }

    #[test]
    fn exact_fit_has_zero_inertia() {
        let pts = array![[0.0f32, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]];
        let (model, labels) = kmeans(pts.view(), &KMeansConfig::new(4, 2)).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn inertia_never_increases() {
        for seed in 0..10 {
            let (pts, _) = blobs(40, seed);
            let (model, _) = kmeans(pts.view(), &KMeansConfig::new(7, seed)).unwrap();
            for w in model.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", model.inertia_history);
            }
        }
    }

    #[test]
    fn empty_cluster_seizes_farthest_point() {
        let pts = array![[0.0f32], [1.0], [2.0], [10.0]];
        // centroid 1 is far from everything and starts empty
        let init = array![[1.0f64], [100.0]];
        let (model, labels) = lloyd(pts.view(), init, 10, 1e-9).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(model.centroids[[1, 0]], 10.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let (pts, _) = blobs(30, 8);
        let a = kmeans(pts.view(), &KMeansConfig::new(5, 77)).unwrap();
        let b = kmeans(pts.view(), &KMeansConfig::new(5, 77)).unwrap();
        assert_eq!(a, b);
    }
}
