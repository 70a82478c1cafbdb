//! Pairwise distance kernels: cosine over embeddings, length-normalized DTW over
//! frame sequences and normalized Levenshtein distance over unit sequences.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LexiconError, Result};
use crate::io::{FrameFeatureSequence, UnitSequence};
use crate::transform::WordEmbedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Cosine,
    Dtw,
    Edit,
}

impl DistanceKind {
    fn tag(self) -> u8 {
        match self {
            DistanceKind::Cosine => 0,
            DistanceKind::Dtw => 1,
            DistanceKind::Edit => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DistanceKind::Cosine),
            1 => Some(DistanceKind::Dtw),
            2 => Some(DistanceKind::Edit),
            _ => None,
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Cosine => "cosine",
            DistanceKind::Dtw => "dtw",
            DistanceKind::Edit => "edit",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(DistanceKind::Cosine),
            "dtw" => Ok(DistanceKind::Dtw),
            "edit" => Ok(DistanceKind::Edit),
            other => Err(LexiconError::Argument(format!("unknown distance kind `{other}`"))),
        }
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// `1 - a.b` for unit-norm embeddings, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LexiconError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
            context: "cosine distance".into(),
        });
    }
    Ok(cosine_unchecked(a, b))
}

fn cosine_unchecked(a: &[f32], b: &[f32]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

/// Frames scaled to unit norm once, so the DTW inner loop is a plain dot product.
/// Zero frames stay zero and therefore sit at cosine distance 1 from everything.
#[derive(Debug, Clone)]
pub struct DtwSequence {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl DtwSequence {
    pub fn new(seq: &FrameFeatureSequence) -> Self {
        let dim = seq.dim();
        let mut data = Vec::with_capacity(seq.len() * dim);
        for t in 0..seq.len() {
            let frame = seq.frame(t);
            let norm = dot(frame, frame).sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            data.extend(frame.iter().map(|&v| f64::from(v) * scale));
        }
        Self {
            data,
            len: seq.len(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// Optional Sakoe-Chiba band. `None` is exact DTW.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtwOptions {
    pub band: Option<usize>,
}

/// Length-normalized DTW with per-frame cosine cost.
pub fn dtw_distance(a: &FrameFeatureSequence, b: &FrameFeatureSequence) -> Result<f64> {
    dtw_distance_with(a, b, DtwOptions::default())
}

pub fn dtw_distance_with(
    a: &FrameFeatureSequence,
    b: &FrameFeatureSequence,
    options: DtwOptions,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(LexiconError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
            context: "dtw distance".into(),
        });
    }
    Ok(dtw_prepared(&DtwSequence::new(a), &DtwSequence::new(b), options))
}

/// DTW over pre-normalized sequences.
///
/// Among all monotone paths with steps (1,0), (0,1), (1,1) the one minimizing
/// (accumulated cost, cell count) lexicographically is selected; the result is
/// its cost divided by its cell count. The tie rule is invariant under swapping
/// the operands, which keeps the distance exactly symmetric.
pub fn dtw_prepared(a: &DtwSequence, b: &DtwSequence, options: DtwOptions) -> f64 {
    let (ta, tb) = (a.len, b.len);
    let window = options.band.map(|w| band_window(ta, tb, w));
    let mut prev: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); tb];
    let mut cur: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); tb];
    for i in 0..ta {
        let (lo, hi) = match &window {
            Some(f) => f(i),
            None => (0, tb - 1),
        };
        cur.iter_mut().for_each(|c| *c = (f64::INFINITY, 0));
        let ai = a.frame(i);
        for j in lo..=hi {
            let local = (1.0 - ai.iter().zip(b.frame(j)).map(|(x, y)| x * y).sum::<f64>()).max(0.0);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, u32::MAX);
                if i > 0 && j > 0 {
                    best = lex_min(best, prev[j - 1]);
                }
                if i > 0 {
                    best = lex_min(best, prev[j]);
                }
                if j > 0 {
                    best = lex_min(best, cur[j - 1]);
                }
                best
            };
            if best.0.is_finite() {
                cur[j] = (best.0 + local, best.1 + 1);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, cells) = prev[tb - 1];
    cost / f64::from(cells)
}

fn lex_min(a: (f64, u32), b: (f64, u32)) -> (f64, u32) {
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Column range allowed in row `i`, centred on the scaled diagonal and wide
/// enough that consecutive rows always stay connected.
fn band_window(ta: usize, tb: usize, band: usize) -> impl Fn(usize) -> (usize, usize) {
    let slope = if ta > 1 {
        (tb - 1) as f64 / (ta - 1) as f64
    } else {
        0.0
    };
    let width = band.max(slope.ceil() as usize);
    move |i| {
        let centre = if ta > 1 { (i as f64 * slope).round() as usize } else { 0 };
        let lo = centre.saturating_sub(width);
        let hi = if ta == 1 { tb - 1 } else { (centre + width).min(tb - 1) };
        (lo, hi)
    }
}

/// Levenshtein distance with unit insert, delete and substitute costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; two empty inputs give 0.
pub fn normalized_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / longest as f64
}

/// A homogeneous collection of items with the kernel that fits their type.
#[derive(Debug, Clone)]
pub enum ItemSet {
    Embeddings { vectors: Vec<Vec<f32>> },
    Sequences { seqs: Vec<DtwSequence>, options: DtwOptions },
    Units { seqs: Vec<Vec<u32>> },
}

impl ItemSet {
    pub fn embeddings(embeddings: &[WordEmbedding]) -> Result<Self> {
        let vectors: Vec<Vec<f32>> = embeddings.iter().map(|e| e.vector.clone()).collect();
        check_dims(vectors.iter().map(Vec::len), "embedding")?;
        Ok(ItemSet::Embeddings { vectors })
    }

    pub fn sequences(seqs: &[FrameFeatureSequence], options: DtwOptions) -> Result<Self> {
        check_dims(seqs.iter().map(FrameFeatureSequence::dim), "frame")?;
        Ok(ItemSet::Sequences {
            seqs: seqs.par_iter().map(DtwSequence::new).collect(),
            options,
        })
    }

    pub fn units(units: &[UnitSequence]) -> Self {
        ItemSet::Units {
            seqs: units.iter().map(|u| u.units.clone()).collect(),
        }
    }

    pub fn kind(&self) -> DistanceKind {
        match self {
            ItemSet::Embeddings { .. } => DistanceKind::Cosine,
            ItemSet::Sequences { .. } => DistanceKind::Dtw,
            ItemSet::Units { .. } => DistanceKind::Edit,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ItemSet::Embeddings { vectors } => vectors.len(),
            ItemSet::Sequences { seqs, .. } => seqs.len(),
            ItemSet::Units { seqs } => seqs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match self {
            ItemSet::Embeddings { vectors } => cosine_unchecked(&vectors[i], &vectors[j]),
            ItemSet::Sequences { seqs, options } => dtw_prepared(&seqs[i], &seqs[j], *options),
            ItemSet::Units { seqs } => normalized_edit_distance(&seqs[i], &seqs[j]),
        }
    }

    /// Distances from item `i` to every item `j > i`.
    pub fn row_upper(&self, i: usize) -> Vec<f64> {
        (i + 1..self.len()).map(|j| self.distance(i, j)).collect()
    }
}

fn check_dims(mut dims: impl Iterator<Item = usize>, what: &str) -> Result<()> {
    if let Some(first) = dims.next() {
        for d in dims {
            if d != first {
                return Err(LexiconError::DimensionMismatch {
                    expected: first,
                    found: d,
                    context: format!("{what} dimension"),
                });
            }
        }
    }
    Ok(())
}

/// Symmetric distance table with a zero diagonal, stored as the strict upper
/// triangle in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    n: usize,
    kind: DistanceKind,
    upper: Vec<f64>,
}

pub const DISTANCE_TABLE_MAGIC: &[u8; 4] = b"LXD1";

impl DistanceTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.upper[condensed_index(self.n, i, j)]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `LXD1`, u32 n, u8 kind tag, then the upper triangle as little-endian f64.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(9 + self.upper.len() * 8);
        buf.extend_from_slice(DISTANCE_TABLE_MAGIC);
        buf.extend_from_slice(&(self.n as u32).to_le_bytes());
        buf.push(self.kind.tag());
        for v in &self.upper {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| LexiconError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| LexiconError::io(path, e))?;
        let bad = |message: &str| LexiconError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: message.to_string(),
        };
        if bytes.len() < 9 || &bytes[..4] != DISTANCE_TABLE_MAGIC {
            return Err(bad("missing LXD1 header"));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let kind = DistanceKind::from_tag(bytes[8]).ok_or_else(|| bad("unknown kind tag"))?;
        let expected = n * n.saturating_sub(1) / 2;
        if bytes.len() != 9 + expected * 8 {
            return Err(bad("payload length does not match n"));
        }
        let upper = bytes[9..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { n, kind, upper })
    }
}

fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    // rows 0..i contribute (n-1) + (n-2) + ... + (n-i) entries
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Default ceiling for materialized distance tables.
pub const DEFAULT_TABLE_BUDGET_BYTES: usize = 2 << 30;

/// All pairwise distances, computed in parallel over rows. Values do not depend
/// on the worker count.
pub fn pairwise_distances(items: &ItemSet, budget_bytes: usize) -> Result<DistanceTable> {
    let n = items.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let needed = pairs * std::mem::size_of::<f64>();
    if needed > budget_bytes {
        return Err(LexiconError::BudgetExceeded {
            needed,
            budget: budget_bytes,
        });
    }
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| items.row_upper(i)).collect();
    Ok(DistanceTable {
        n,
        kind: items.kind(),
        upper: rows.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(rows: &[&[f32]]) -> FrameFeatureSequence {
        let d = rows[0].len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        FrameFeatureSequence::new("s", Array2::from_shape_vec((rows.len(), d), data).unwrap()).unwrap()
    }

    fn random_unit_seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> FrameFeatureSequence {
        let mut frames = Array2::<f32>::zeros((t, d));
        for mut row in frames.outer_iter_mut() {
            row.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            let n = row.iter().map(|v| v * v).sum::<f32>().sqrt();
            row.iter_mut().for_each(|v| *v /= n);
        }
        FrameFeatureSequence::new("r", frames).unwrap()
    }

    /// Enumerates every monotone path explicitly and applies the same
    /// (cost, length) selection rule.
    fn dtw_brute_force(a: &DtwSequence, b: &DtwSequence) -> f64 {
        fn local(a: &DtwSequence, b: &DtwSequence, i: usize, j: usize) -> f64 {
            (1.0 - a.frame(i).iter().zip(b.frame(j)).map(|(x, y)| x * y).sum::<f64>()).max(0.0)
        }
        fn walk(
            a: &DtwSequence,
            b: &DtwSequence,
            i: usize,
            j: usize,
            cost: f64,
            cells: u32,
            best: &mut (f64, u32),
        ) {
            let cost = cost + local(a, b, i, j);
            let cells = cells + 1;
            if i + 1 == a.len() && j + 1 == b.len() {
                *best = lex_min(*best, (cost, cells));
                return;
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, cost, cells, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, cost, cells, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, cost, cells, best);
            }
        }
        let mut best = (f64::INFINITY, u32::MAX);
        walk(a, b, 0, 0, 0.0, 0, &mut best);
        best.0 / f64::from(best.1)
    }

    #[test]
    fn cosine_examples() {
        assert!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap().abs() < 1e-12);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let d = cosine_distance(&[1.0, 0.0], &[s, s]).unwrap();
        assert!((d - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-6, "{d}");
        assert!((d - 0.29289).abs() < 1e-5);
        assert!(cosine_distance(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn dtw_of_identical_sequences_is_zero() {
        let a = seq(&[&[1.0, 2.0, 0.5], &[0.0, 1.0, 1.0], &[3.0, -1.0, 0.0]]);
        assert!(dtw_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn dtw_single_frames_reduce_to_cosine() {
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let a = seq(&[&[1.0, 0.0]]);
        let b = seq(&[&[s, s]]);
        let expected = cosine_distance(a.frame(0), b.frame(0)).unwrap();
        assert!((dtw_distance(&a, &b).unwrap() - expected).abs() < 1e-7);
    }

    #[test]
    fn dtw_dimension_mismatch() {
        let a = seq(&[&[1.0, 0.0]]);
        let b = seq(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(dtw_distance(&a, &b), Err(LexiconError::DimensionMismatch { .. })));
    }

    #[test]
    fn dtw_matches_path_enumeration_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let ta = rng.random_range(1..=3);
            let tb = rng.random_range(1..=3);
            let a = DtwSequence::new(&random_unit_seq(&mut rng, ta, 4));
            let b = DtwSequence::new(&random_unit_seq(&mut rng, tb, 4));
            assert_eq!(dtw_prepared(&a, &b, DtwOptions::default()), dtw_brute_force(&a, &b));
        }
    }

    #[test]
    fn dtw_is_bounded_by_diagonal_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t = rng.random_range(1..8);
            let a = random_unit_seq(&mut rng, t, 3);
            let b = random_unit_seq(&mut rng, t, 3);
            let (pa, pb) = (DtwSequence::new(&a), DtwSequence::new(&b));
            let diagonal: f64 = (0..t)
                .map(|i| (1.0 - pa.frame(i).iter().zip(pb.frame(i)).map(|(x, y)| x * y).sum::<f64>()).max(0.0))
                .sum::<f64>()
                / t as f64;
            assert!(dtw_prepared(&pa, &pb, DtwOptions::default()) <= diagonal);
        }
    }

    #[test]
    fn wide_band_equals_exact_dtw() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let ta = rng.random_range(1..12);
            let a = random_unit_seq(&mut rng, ta, 3);
            let tb = rng.random_range(1..12);
            let b = random_unit_seq(&mut rng, tb, 3);
            let exact = dtw_distance(&a, &b).unwrap();
            let banded = dtw_distance_with(&a, &b, DtwOptions { band: Some(20) }).unwrap();
            assert_eq!(exact, banded);
            let narrow = dtw_distance_with(&a, &b, DtwOptions { band: Some(1) }).unwrap();
            assert!(narrow.is_finite());
        }
    }

    #[test]
    fn edit_distance_examples() {
        let kitten: Vec<char> = "kitten".chars().collect();
        let sitting: Vec<char> = "sitting".chars().collect();
        assert_eq!(edit_distance(&kitten, &sitting), 3);
        assert!((normalized_edit_distance(&kitten, &sitting) - 3.0 / 7.0).abs() < 1e-12);
        assert_eq!(edit_distance(&kitten, &kitten), 0);
        let empty: [char; 0] = [];
        assert_eq!(edit_distance(&empty, &sitting), 7);
        assert_eq!(normalized_edit_distance(&empty, &sitting), 1.0);
        assert_eq!(normalized_edit_distance(&empty, &empty), 0.0);
    }

    #[test]
    fn pairwise_matches_scalar_kernels() {
        let e = |v: [f32; 2]| WordEmbedding {
            segment_id: "e".into(),
            vector: v.to_vec(),
        };
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let embs = [e([1.0, 0.0]), e([0.0, 1.0]), e([s, s])];
        let table = pairwise_distances(&ItemSet::embeddings(&embs).unwrap(), usize::MAX).unwrap();
        assert_eq!(table.n(), 3);
        for i in 0..3 {
            assert_eq!(table.get(i, i), 0.0);
            for j in 0..3 {
                if i != j {
                    let want = cosine_distance(&embs[i].vector, &embs[j].vector).unwrap();
                    assert_eq!(table.get(i, j), want);
                    assert_eq!(table.get(i, j), table.get(j, i));
                }
            }
        }
        let single = pairwise_distances(&ItemSet::embeddings(&embs[..1]).unwrap(), 0).unwrap();
        assert_eq!(single.n(), 1);
        assert_eq!(single.get(0, 0), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let units: Vec<UnitSequence> = (0..100)
            .map(|i| UnitSequence::new(format!("u{i}"), vec![i], 500).unwrap())
            .collect();
        let err = pairwise_distances(&ItemSet::units(&units), 1024).unwrap_err();
        assert!(matches!(err, LexiconError::BudgetExceeded { .. }));
        assert!(err.to_string().contains("threshold streaming"));
    }

    #[test]
    fn parallel_and_sequential_tables_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let seqs: Vec<FrameFeatureSequence> = (0..200)
            .map(|_| {
                let t = rng.random_range(1..6);
                random_unit_seq(&mut rng, t, 4)
            })
            .collect();
        let items = ItemSet::sequences(&seqs, DtwOptions::default()).unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = single.install(|| pairwise_distances(&items, usize::MAX).unwrap());
        let b = many.install(|| pairwise_distances(&items, usize::MAX).unwrap());
        let bits = |t: &DistanceTable| t.upper().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn table_file_round_trips() {
        let units: Vec<UnitSequence> = [vec![1, 2, 3], vec![1, 2], vec![4]]
            .into_iter()
            .enumerate()
            .map(|(i, u)| UnitSequence::new(format!("u{i}"), u, 10).unwrap())
            .collect();
        let table = pairwise_distances(&ItemSet::units(&units), usize::MAX).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.lxd");
        table.write(&path).unwrap();
        assert_eq!(DistanceTable::read(&path).unwrap(), table);
    }

    proptest! {
        #[test]
        fn edit_distance_is_a_metric(
            a in proptest::collection::vec(0u8..4, 0..8),
            b in proptest::collection::vec(0u8..4, 0..8),
            c in proptest::collection::vec(0u8..4, 0..8),
        ) {
            prop_assert_eq!(edit_distance(&a, &a), 0);
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
            let n = normalized_edit_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&n));
        }

        #[test]
        fn dtw_is_symmetric(seed in any::<u64>(), ta in 1usize..7, tb in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_unit_seq(&mut rng, ta, 3);
            let b = random_unit_seq(&mut rng, tb, 3);
            prop_assert_eq!(dtw_distance(&a, &b).unwrap(), dtw_distance(&b, &a).unwrap());
            prop_assert!(dtw_distance(&a, &a).unwrap() < 1e-6);
        }
    }
}
