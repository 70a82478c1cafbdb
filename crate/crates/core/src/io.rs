//! On-disk formats: the JSON Lines manifest, `LXK1` binary matrices, two-column
//! clustering files and JSON reports.
//!
//! The manifest order is the canonical segment order for everything downstream.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{LexiconError, Result};

/// Frame period of every supported feature extractor.
pub const DEFAULT_FRAME_PERIOD_S: f64 = 0.02;

pub const LXK_MAGIC: &[u8; 4] = b"LXK1";
pub const LXK_HEADER_LEN: usize = 13;
pub const FEATURE_EXTENSION: &str = "lxk";

/// One word segment with optional ground truth used only for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetadata {
    pub segment_id: String,
    pub utterance_id: String,
    pub speaker_id: String,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phones: Option<Vec<String>>,
}

impl SegmentMetadata {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    fn validate(&self) -> Result<()> {
        if !(self.start_s.is_finite() && self.end_s.is_finite()) || self.end_s <= self.start_s {
            return Err(LexiconError::Validation(format!(
                "segment `{}` has end_s {} <= start_s {}",
                self.segment_id, self.end_s, self.start_s
            )));
        }
        if matches!(&self.phones, Some(p) if p.is_empty()) {
            return Err(LexiconError::Validation(format!(
                "segment `{}` has an empty phone list",
                self.segment_id
            )));
        }
        Ok(())
    }
}

/// Ordered, validated list of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    segments: Vec<SegmentMetadata>,
    total_duration_s: f64,
    index: HashMap<String, usize>,
}

impl Manifest {
    pub fn new(segments: Vec<SegmentMetadata>) -> Result<Self> {
        let mut index = HashMap::with_capacity(segments.len());
        for (i, seg) in segments.iter().enumerate() {
            seg.validate()?;
            if index.insert(seg.segment_id.clone(), i).is_some() {
                return Err(LexiconError::Validation(format!(
                    "duplicate segment_id `{}`",
                    seg.segment_id
                )));
            }
        }
        let total_duration_s = segments.iter().map(SegmentMetadata::duration_s).sum();
        Ok(Self {
            segments,
            total_duration_s,
            index,
        })
    }

    pub fn segments(&self) -> &[SegmentMetadata] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_duration_s
    }

    pub fn position(&self, segment_id: &str) -> Option<usize> {
        self.index.get(segment_id).copied()
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|s| s.segment_id.as_str())
    }

    /// Word labels in manifest order; errors on the first unlabeled segment.
    pub fn word_labels(&self) -> Result<Vec<&str>> {
        self.segments
            .iter()
            .map(|s| {
                s.word_label.as_deref().ok_or_else(|| {
                    LexiconError::Validation(format!(
                        "segment `{}` has no word_label",
                        s.segment_id
                    ))
                })
            })
            .collect()
    }

    /// Word labels mapped to dense type indices by first appearance.
    pub fn label_indices(&self) -> Result<(Vec<usize>, Vec<String>)> {
        let labels = self.word_labels()?;
        let mut types: Vec<String> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let idx = labels
            .iter()
            .map(|&l| {
                *seen.entry(l).or_insert_with(|| {
                    types.push(l.to_string());
                    types.len() - 1
                })
            })
            .collect();
        Ok((idx, types))
    }

    pub fn phones(&self) -> Result<Vec<&[String]>> {
        self.segments
            .iter()
            .map(|s| {
                s.phones.as_deref().ok_or_else(|| {
                    LexiconError::Validation(format!("segment `{}` has no phones", s.segment_id))
                })
            })
            .collect()
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LexiconError::io(path, e))?;
    let mut segments = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LexiconError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let seg: SegmentMetadata =
            serde_json::from_str(&line).map_err(|e| LexiconError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        segments.push(seg);
    }
    Manifest::new(segments)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for seg in manifest.segments() {
        serde_json::to_writer(&mut out, seg)?;
        out.write_all(b"\n").map_err(|e| LexiconError::io(path, e))?;
    }
    out.flush().map_err(|e| LexiconError::io(path, e))
}

/// Continuous frame features of one segment (`T x D`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureSequence {
    pub segment_id: String,
    pub frames: Array2<f32>,
    pub frame_period_s: f64,
}

impl FrameFeatureSequence {
    pub fn new(segment_id: impl Into<String>, frames: Array2<f32>) -> Result<Self> {
        let segment_id = segment_id.into();
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(LexiconError::Validation(format!(
                "segment `{segment_id}` has an empty {}x{} feature matrix",
                frames.nrows(),
                frames.ncols()
            )));
        }
        if let Some(frame) = frames
            .outer_iter()
            .position(|row| row.iter().any(|v| !v.is_finite()))
        {
            return Err(LexiconError::NonFinite { segment_id, frame });
        }
        Ok(Self {
            segment_id,
            frames: frames.as_standard_layout().into_owned(),
            frame_period_s: DEFAULT_FRAME_PERIOD_S,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let d = self.dim();
        &self.frames.as_slice().expect("standard layout")[t * d..(t + 1) * d]
    }
}

/// Discrete unit IDs of one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSequence {
    pub segment_id: String,
    pub units: Vec<u32>,
}

impl UnitSequence {
    pub fn new(segment_id: impl Into<String>, units: Vec<u32>, codebook_size: usize) -> Result<Self> {
        let segment_id = segment_id.into();
        if units.is_empty() {
            return Err(LexiconError::Validation(format!(
                "segment `{segment_id}` has an empty unit sequence"
            )));
        }
        if let Some(&u) = units.iter().find(|&&u| u as usize >= codebook_size) {
            return Err(LexiconError::Validation(format!(
                "segment `{segment_id}` has unit {u} outside codebook of size {codebook_size}"
            )));
        }
        Ok(Self { segment_id, units })
    }
}

/// Payload of an `LXK1` file.
#[derive(Debug, Clone, PartialEq)]
pub enum LxkMatrix {
    F32(Array2<f32>),
    U16(Array2<u16>),
}

impl LxkMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            LxkMatrix::F32(m) => m.dim(),
            LxkMatrix::U16(m) => m.dim(),
        }
    }

    fn dtype(&self) -> u8 {
        match self {
            LxkMatrix::F32(_) => 0,
            LxkMatrix::U16(_) => 1,
        }
    }
}

/// Serializes: `LXK1`, u32 T, u32 D, u8 dtype, row-major little-endian payload.
pub fn encode_lxk(matrix: &LxkMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.shape();
    let rows32 = u32::try_from(rows)
        .map_err(|_| LexiconError::Argument(format!("{rows} rows exceed the LXK1 limit")))?;
    let cols32 = u32::try_from(cols)
        .map_err(|_| LexiconError::Argument(format!("{cols} columns exceed the LXK1 limit")))?;
    let width = if matches!(matrix, LxkMatrix::F32(_)) { 4 } else { 2 };
    let mut buf = Vec::with_capacity(LXK_HEADER_LEN + rows * cols * width);
    buf.extend_from_slice(LXK_MAGIC);
    buf.extend_from_slice(&rows32.to_le_bytes());
    buf.extend_from_slice(&cols32.to_le_bytes());
    buf.push(matrix.dtype());
    match matrix {
        LxkMatrix::F32(m) => m.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        LxkMatrix::U16(m) => m.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(buf)
}

pub fn decode_lxk(bytes: &[u8], path: &Path) -> Result<LxkMatrix> {
    let bad = |message: String| LexiconError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    if bytes.len() < LXK_HEADER_LEN || &bytes[..4] != LXK_MAGIC {
        return Err(bad("missing LXK1 header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[LXK_HEADER_LEN..];
    match bytes[12] {
        0 => {
            if payload.len() != rows * cols * 4 {
                return Err(bad(format!(
                    "payload is {} bytes, expected {} for {rows}x{cols} f32",
                    payload.len(),
                    rows * cols * 4
                )));
            }
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(LxkMatrix::F32(Array2::from_shape_vec((rows, cols), data).unwrap()))
        }
        1 => {
            if payload.len() != rows * cols * 2 {
                return Err(bad(format!(
                    "payload is {} bytes, expected {} for {rows}x{cols} u16",
                    payload.len(),
                    rows * cols * 2
                )));
            }
            let data = payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(LxkMatrix::U16(Array2::from_shape_vec((rows, cols), data).unwrap()))
        }
        tag => Err(bad(format!("unknown dtype tag {tag}"))),
    }
}

pub fn write_lxk(matrix: &LxkMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_lxk(matrix)?).map_err(|e| LexiconError::io(path, e))
}

pub fn read_lxk(path: impl AsRef<Path>) -> Result<LxkMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| LexiconError::io(path, e))?;
    decode_lxk(&bytes, path)
}

pub fn feature_path(dir: &Path, segment_id: &str) -> PathBuf {
    dir.join(format!("{segment_id}.{FEATURE_EXTENSION}"))
}

/// Loads one continuous feature file per manifest entry, in manifest order.
pub fn read_features(dir: impl AsRef<Path>, manifest: &Manifest) -> Result<Vec<FrameFeatureSequence>> {
    let dir = dir.as_ref();
    let seqs = manifest
        .segments()
        .par_iter()
        .map(|seg| {
            let path = feature_path(dir, &seg.segment_id);
            let matrix = read_segment_file(&path, &seg.segment_id)?;
            match matrix {
                LxkMatrix::F32(frames) => FrameFeatureSequence::new(seg.segment_id.clone(), frames),
                LxkMatrix::U16(_) => Err(LexiconError::Validation(format!(
                    "segment `{}` holds discrete units where continuous features were expected",
                    seg.segment_id
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    check_shared_dim(&seqs)?;
    Ok(seqs)
}

/// Loads one discrete unit file (`T x 1`, u16) per manifest entry.
pub fn read_units(dir: impl AsRef<Path>, manifest: &Manifest) -> Result<Vec<UnitSequence>> {
    let dir = dir.as_ref();
    manifest
        .segments()
        .par_iter()
        .map(|seg| {
            let path = feature_path(dir, &seg.segment_id);
            match read_segment_file(&path, &seg.segment_id)? {
                LxkMatrix::U16(m) if m.ncols() == 1 => UnitSequence::new(
                    seg.segment_id.clone(),
                    m.iter().map(|&u| u32::from(u)).collect(),
                    usize::from(u16::MAX) + 1,
                ),
                _ => Err(LexiconError::Validation(format!(
                    "segment `{}` is not a single-column u16 unit file",
                    seg.segment_id
                ))),
            }
        })
        .collect()
}

fn read_segment_file(path: &Path, segment_id: &str) -> Result<LxkMatrix> {
    match fs::read(path) {
        Ok(bytes) => decode_lxk(&bytes, path),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(LexiconError::MissingFeatures {
            segment_id: segment_id.to_string(),
            path: path.to_path_buf(),
        }),
        Err(e) => Err(LexiconError::io(path, e)),
    }
}

pub fn check_shared_dim(seqs: &[FrameFeatureSequence]) -> Result<()> {
    if let Some(first) = seqs.first() {
        if let Some(bad) = seqs.iter().find(|s| s.dim() != first.dim()) {
            return Err(LexiconError::DimensionMismatch {
                expected: first.dim(),
                found: bad.dim(),
                context: format!("feature dimension of segment `{}`", bad.segment_id),
            });
        }
    }
    Ok(())
}

pub fn write_features(dir: impl AsRef<Path>, seqs: &[FrameFeatureSequence]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| LexiconError::io(dir, e))?;
    seqs.par_iter().try_for_each(|s| {
        write_lxk(&LxkMatrix::F32(s.frames.clone()), feature_path(dir, &s.segment_id))
    })
}

pub fn write_units(dir: impl AsRef<Path>, units: &[UnitSequence]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| LexiconError::io(dir, e))?;
    units.par_iter().try_for_each(|u| {
        let data = u
            .units
            .iter()
            .map(|&x| {
                u16::try_from(x).map_err(|_| {
                    LexiconError::Argument(format!("unit {x} does not fit the u16 unit format"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = Array2::from_shape_vec((data.len(), 1), data).unwrap();
        write_lxk(&LxkMatrix::U16(m), feature_path(dir, &u.segment_id))
    })
}

/// Total assignment of segments to clusters, with IDs canonicalized by first
/// appearance in segment order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    segment_ids: Vec<String>,
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Clustering {
    pub fn new(segment_ids: Vec<String>, labels: &[usize]) -> Result<Self> {
        if segment_ids.len() != labels.len() {
            return Err(LexiconError::Argument(format!(
                "{} segment ids but {} labels",
                segment_ids.len(),
                labels.len()
            )));
        }
        let mut seen = HashSet::with_capacity(segment_ids.len());
        if let Some(dup) = segment_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(LexiconError::Validation(format!(
                "segment `{dup}` assigned twice"
            )));
        }
        let (labels, n_clusters) = canonicalize(labels);
        Ok(Self {
            segment_ids,
            labels,
            n_clusters,
        })
    }

    /// Clustering over the manifest's segments, labels given in manifest order.
    pub fn for_manifest(manifest: &Manifest, labels: &[usize]) -> Result<Self> {
        Self::new(manifest.segment_ids().map(str::to_string).collect(), labels)
    }

    pub fn segment_ids(&self) -> &[String] {
        &self.segment_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reorders to manifest order, failing unless coverage is exact.
    pub fn aligned_to(&self, manifest: &Manifest) -> Result<Clustering> {
        if self.len() != manifest.len() {
            let missing = manifest
                .segment_ids()
                .find(|id| !self.segment_ids.iter().any(|s| s == id));
            return Err(LexiconError::Validation(match missing {
                Some(id) => format!("clustering does not cover segment `{id}`"),
                None => format!(
                    "clustering has {} segments, manifest has {}",
                    self.len(),
                    manifest.len()
                ),
            }));
        }
        let mut labels = vec![usize::MAX; manifest.len()];
        for (id, &label) in self.segment_ids.iter().zip(&self.labels) {
            let pos = manifest.position(id).ok_or_else(|| {
                LexiconError::Validation(format!("segment `{id}` is not in the manifest"))
            })?;
            labels[pos] = label;
        }
        Clustering::for_manifest(manifest, &labels)
    }

    /// Members of each cluster as positions into this clustering's order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

/// Relabels by first appearance; returns the new labels and the cluster count.
pub fn canonicalize(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map: HashMap<usize, usize> = HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

pub fn write_clustering(clustering: &Clustering, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for (id, label) in clustering.segment_ids.iter().zip(&clustering.labels) {
        writeln!(out, "{id}\t{label}").map_err(|e| LexiconError::io(path, e))?;
    }
    out.flush().map_err(|e| LexiconError::io(path, e))
}

pub fn read_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| LexiconError::io(path, e))?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| LexiconError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `segment_id<TAB>cluster_id`".into()))?;
        let label = label
            .trim()
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad cluster id: {e}")))?;
        ids.push(id.to_string());
        labels.push(label);
    }
    Clustering::new(ids, &labels)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| LexiconError::io(path, e))?;
    out.flush().map_err(|e| LexiconError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| LexiconError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| LexiconError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| LexiconError::io(path, e))
}
