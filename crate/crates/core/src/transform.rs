//! Representation-side processing: standardization, PCA, averaged word
//! embeddings, codebook training, quantization and duration-penalized smoothing.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::kmeans::{kmeans, KMeansConfig};
use crate::error::{LexiconError, Result};
use crate::io::{check_shared_dim, read_lxk, write_lxk, FrameFeatureSequence, LxkMatrix, UnitSequence};

/// Default PCA output dimension.
pub const DEFAULT_PCA_DIM: usize = 350;
/// Default number of discrete units.
pub const DEFAULT_CODEBOOK_SIZE: usize = 500;

const POOL_CHUNK: usize = 1024;

/// Per-dimension pooled statistics used for standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant dimensions carry 1.
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn apply(&self, seq: &FrameFeatureSequence) -> Result<FrameFeatureSequence> {
        if seq.dim() != self.mean.len() {
            return Err(LexiconError::DimensionMismatch {
                expected: self.mean.len(),
                found: seq.dim(),
                context: format!("normalizing segment `{}`", seq.segment_id),
            });
        }
        let mut frames = seq.frames.clone();
        for mut row in frames.outer_iter_mut() {
            for ((v, &m), &s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((f64::from(*v) - m) / s) as f32;
            }
        }
        Ok(FrameFeatureSequence {
            segment_id: seq.segment_id.clone(),
            frames,
            frame_period_s: seq.frame_period_s,
        })
    }
}

fn pooled_count(seqs: &[FrameFeatureSequence]) -> usize {
    seqs.iter().map(FrameFeatureSequence::len).sum()
}

/// All frames stacked in segment order.
pub fn pool_frames(seqs: &[FrameFeatureSequence]) -> Array2<f32> {
    let views: Vec<ArrayView2<f32>> = seqs.iter().map(|s| s.frames.view()).collect();
    if views.is_empty() {
        return Array2::zeros((0, 0));
    }
    ndarray::concatenate(Axis(0), &views).expect("shared dimension")
}

fn pooled_mean(pooled: &Array2<f32>) -> Array1<f64> {
    let n = pooled.nrows() as f64;
    let partial: Vec<Array1<f64>> = pooled
        .axis_chunks_iter(Axis(0), POOL_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| chunk.mapv(f64::from).sum_axis(Axis(0)))
        .collect();
    let mut total = Array1::zeros(pooled.ncols());
    for p in partial {
        total += &p;
    }
    total / n
}

/// Standardizes every dimension to zero mean and unit variance over the pooled
/// frames of all sequences.
pub fn normalize_mean_variance(
    seqs: &[FrameFeatureSequence],
) -> Result<(Vec<FrameFeatureSequence>, NormStats)> {
    check_shared_dim(seqs)?;
    let n = pooled_count(seqs);
    if n < 2 {
        return Err(LexiconError::Argument(format!(
            "mean-variance normalization needs at least 2 frames, got {n}"
        )));
    }
    let pooled = pool_frames(seqs);
    let mean = pooled_mean(&pooled);
    let partial: Vec<Array1<f64>> = pooled
        .axis_chunks_iter(Axis(0), POOL_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let centred = chunk.mapv(f64::from) - &mean;
            (&centred * &centred).sum_axis(Axis(0))
        })
        .collect();
    let mut var = Array1::<f64>::zeros(mean.len());
    for p in partial {
        var += &p;
    }
    var /= n as f64;
    let std: Vec<f64> = var
        .iter()
        .enumerate()
        .map(|(dim, &v)| {
            if v > 0.0 {
                v.sqrt()
            } else {
                log::warn!("dimension {dim} has zero variance; centring only");
                1.0
            }
        })
        .collect();
    let stats = NormStats {
        mean: mean.to_vec(),
        std,
    };
    let out = seqs.par_iter().map(|s| stats.apply(s)).collect::<Result<_>>()?;
    Ok((out, stats))
}

/// Linear projection onto the leading principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Array1<f64>,
    /// `D x d`, columns are orthonormal principal axes.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }

    /// Persists as a `(d + 2) x D` f32 `LXK1` matrix: the mean, then one principal
    /// axis per row, then the explained variances zero-padded to width D.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (big_d, d) = self.components.dim();
        let mut m = Array2::<f32>::zeros((d + 2, big_d));
        m.row_mut(0).assign(&self.mean.mapv(|v| v as f32));
        m.slice_mut(s![1..=d, ..])
            .assign(&self.components.t().mapv(|v| v as f32));
        m.slice_mut(s![d + 1, ..d])
            .assign(&self.explained_variance.mapv(|v| v as f32));
        write_lxk(&LxkMatrix::F32(m), path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let LxkMatrix::F32(m) = read_lxk(path)? else {
            return Err(LexiconError::Validation(format!(
                "{} is not an f32 PCA file",
                path.display()
            )));
        };
        if m.nrows() < 3 || m.nrows() - 2 > m.ncols() {
            return Err(LexiconError::Validation(format!(
                "{} has shape {:?}, not a PCA layout",
                path.display(),
                m.dim()
            )));
        }
        let d = m.nrows() - 2;
        Ok(Self {
            mean: m.row(0).mapv(f64::from),
            components: m.slice(s![1..=d, ..]).t().mapv(f64::from),
            explained_variance: m.slice(s![d + 1, ..d]).mapv(f64::from),
        })
    }
}

/// Top-`d` eigenvectors of the pooled-frame covariance, by descending variance.
pub fn fit_pca(seqs: &[FrameFeatureSequence], d: usize) -> Result<PcaProjection> {
    check_shared_dim(seqs)?;
    let n = pooled_count(seqs);
    let big_d = seqs.first().map_or(0, FrameFeatureSequence::dim);
    if d == 0 || d > big_d || d >= n {
        return Err(LexiconError::Argument(format!(
            "PCA needs 1 <= d <= D and d < frame count; got d={d}, D={big_d}, frames={n}"
        )));
    }
    let pooled = pool_frames(seqs);
    let mean = pooled_mean(&pooled);
    let partial: Vec<Array2<f64>> = pooled
        .axis_chunks_iter(Axis(0), POOL_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let centred = chunk.mapv(f64::from) - &mean;
            centred.t().dot(&centred)
        })
        .collect();
    let mut cov = Array2::<f64>::zeros((big_d, big_d));
    for p in partial {
        cov += &p;
    }
    cov /= (n - 1) as f64;

    let eig = SymmetricEigen::new(DMatrix::from_fn(big_d, big_d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..big_d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Array2::<f64>::zeros((big_d, d));
    let mut explained = Array1::<f64>::zeros(d);
    for (col, &src) in order.iter().take(d).enumerate() {
        let v = eig.eigenvectors.column(src);
        // sign convention: largest-magnitude entry positive
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for row in 0..big_d {
            components[[row, col]] = sign * v[row];
        }
        explained[col] = eig.eigenvalues[src].max(0.0);
    }
    Ok(PcaProjection {
        mean,
        components,
        explained_variance: explained,
    })
}

/// `(frames - mean) . components`
pub fn apply_pca(seq: &FrameFeatureSequence, p: &PcaProjection) -> Result<FrameFeatureSequence> {
    if seq.dim() != p.input_dim() {
        return Err(LexiconError::DimensionMismatch {
            expected: p.input_dim(),
            found: seq.dim(),
            context: format!("projecting segment `{}`", seq.segment_id),
        });
    }
    let centred = seq.frames.mapv(f64::from) - &p.mean;
    let projected = centred.dot(&p.components).mapv(|v| v as f32);
    Ok(FrameFeatureSequence {
        segment_id: seq.segment_id.clone(),
        frames: projected,
        frame_period_s: seq.frame_period_s,
    })
}

/// Fixed-dimensional, unit-norm representation of one word segment.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbedding {
    pub segment_id: String,
    pub vector: Vec<f32>,
}

/// Temporal mean of the frames, scaled to unit L2 norm.
pub fn average_embed(seq: &FrameFeatureSequence) -> Result<WordEmbedding> {
    let mean = seq.frames.mapv(f64::from).mean_axis(Axis(0)).expect("T >= 1");
    let vector = unit_vector(mean.as_slice().unwrap()).ok_or_else(|| {
        LexiconError::Degenerate(format!(
            "segment `{}` has a zero mean frame",
            seq.segment_id
        ))
    })?;
    Ok(WordEmbedding {
        segment_id: seq.segment_id.clone(),
        vector,
    })
}

/// `v / |v|` in f32, or `None` for a zero vector.
pub fn unit_vector(v: &[f64]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|x| (x / norm) as f32).collect())
}

/// Stacks embeddings into an `n x d` matrix.
pub fn embedding_matrix(embeddings: &[WordEmbedding]) -> Result<Array2<f32>> {
    let d = embeddings.first().map_or(0, |e| e.vector.len());
    let mut data = Vec::with_capacity(embeddings.len() * d);
    for e in embeddings {
        if e.vector.len() != d {
            return Err(LexiconError::DimensionMismatch {
                expected: d,
                found: e.vector.len(),
                context: format!("embedding of `{}`", e.segment_id),
            });
        }
        data.extend_from_slice(&e.vector);
    }
    Ok(Array2::from_shape_vec((embeddings.len(), d), data).unwrap())
}

/// K unit centroids over raw frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Array2<f32>,
}

impl Codebook {
    pub fn new(centroids: Array2<f32>) -> Result<Self> {
        if centroids.nrows() == 0 || centroids.ncols() == 0 {
            return Err(LexiconError::Argument("empty codebook".into()));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(LexiconError::Validation("non-finite codebook centroid".into()));
        }
        Ok(Self {
            centroids: centroids.as_standard_layout().into_owned(),
        })
    }

    pub fn size(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    fn centroid(&self, k: usize) -> &[f32] {
        let d = self.dim();
        &self.centroids.as_slice().unwrap()[k * d..(k + 1) * d]
    }

    fn check_dim(&self, seq: &FrameFeatureSequence) -> Result<()> {
        if seq.dim() != self.dim() {
            return Err(LexiconError::DimensionMismatch {
                expected: self.dim(),
                found: seq.dim(),
                context: format!("quantizing segment `{}`", seq.segment_id),
            });
        }
        Ok(())
    }

    /// Squared distance from `frame` to centroid `k`.
    pub fn cost(&self, frame: &[f32], k: usize) -> f64 {
        frame
            .iter()
            .zip(self.centroid(k))
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lxk(&LxkMatrix::F32(self.centroids.clone()), path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        match read_lxk(path.as_ref())? {
            LxkMatrix::F32(m) => Codebook::new(m),
            LxkMatrix::U16(_) => Err(LexiconError::Validation(format!(
                "{} is not an f32 codebook",
                path.as_ref().display()
            ))),
        }
    }
}

/// k-means codebook over the pooled raw frames.
pub fn train_codebook(seqs: &[FrameFeatureSequence], k: usize, seed: u64) -> Result<Codebook> {
    check_shared_dim(seqs)?;
    let pooled = pool_frames(seqs);
    if k == 0 || pooled.nrows() < k {
        return Err(LexiconError::Argument(format!(
            "codebook of size {k} needs at least {k} frames, got {}",
            pooled.nrows()
        )));
    }
    let mut distinct = HashSet::new();
    for row in pooled.outer_iter() {
        distinct.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if distinct.len() >= k {
            break;
        }
    }
    if distinct.len() < k {
        return Err(LexiconError::Argument(format!(
            "codebook of size {k} needs {k} distinct frames, found {}",
            distinct.len()
        )));
    }
    let (model, _) = kmeans(pooled.view(), &KMeansConfig::new(k, seed))?;
    Codebook::new(model.centroids.mapv(|v| v as f32))
}

fn local_costs(seq: &FrameFeatureSequence, cb: &Codebook) -> Vec<Vec<f64>> {
    (0..seq.len())
        .map(|t| (0..cb.size()).map(|k| cb.cost(seq.frame(t), k)).collect())
        .collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = k;
        }
    }
    best
}

/// Nearest-centroid unit per frame; ties go to the lowest unit index.
pub fn quantize(seq: &FrameFeatureSequence, cb: &Codebook) -> Result<UnitSequence> {
    cb.check_dim(seq)?;
    let units = local_costs(seq, cb)
        .iter()
        .map(|costs| argmin(costs) as u32)
        .collect();
    UnitSequence::new(seq.segment_id.clone(), units, cb.size())
}

/// Duration-penalized smoothing: the unit sequence minimizing squared
/// quantization error plus `lambda` per unit change. The result is not
/// deduplicated.
///
/// Among equally good predecessors the DP keeps the current unit, then prefers
/// the lowest index. `lambda == 0` is exactly [`quantize`].
pub fn dpdp_smooth(seq: &FrameFeatureSequence, cb: &Codebook, lambda: f64) -> Result<UnitSequence> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LexiconError::Argument(format!(
            "duration penalty must be a finite non-negative number, got {lambda}"
        )));
    }
    cb.check_dim(seq)?;
    if lambda == 0.0 {
        return quantize(seq, cb);
    }
    let local = local_costs(seq, cb);
    let k = cb.size();
    let t_len = local.len();
    let mut cost = local[0].clone();
    let mut back = vec![vec![0u32; k]; t_len];
    for t in 1..t_len {
        let best_prev = argmin(&cost);
        let switch = cost[best_prev] + lambda;
        let mut next = vec![0.0; k];
        for unit in 0..k {
            let stay = cost[unit];
            let (prev, base) = if stay <= switch {
                (unit, stay)
            } else {
                (best_prev, switch)
            };
            back[t][unit] = prev as u32;
            next[unit] = base + local[t][unit];
        }
        cost = next;
    }
    let mut units = vec![0u32; t_len];
    units[t_len - 1] = argmin(&cost) as u32;
    for t in (1..t_len).rev() {
        units[t - 1] = back[t][units[t] as usize];
    }
    UnitSequence::new(seq.segment_id.clone(), units, k)
}

/// The smoothing objective of `units` for `seq`.
pub fn dpdp_objective(seq: &FrameFeatureSequence, cb: &Codebook, units: &[u32], lambda: f64) -> f64 {
    let fit: f64 = units
        .iter()
        .enumerate()
        .map(|(t, &u)| cb.cost(seq.frame(t), u as usize))
        .sum();
    let changes = units.windows(2).filter(|w| w[0] != w[1]).count();
    fit + lambda * changes as f64
}
