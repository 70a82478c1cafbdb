//! Synthetic corpora with known word types.
//!
//! Every type has a prototype made of a few random unit-norm "states", each held
//! for at least two frames, and a random phone string. Instances stretch or
//! shrink state durations by one frame at a time and add per-frame Gaussian
//! noise. With zero noise, same-type instances are therefore at DTW distance 0
//! however much their lengths differ.

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LexiconError, Result};
use crate::evaluate::EvalReport;
use crate::experiment::{perfect_representations, prepare, run_system, Dataset, PerfectMode, PrepConfig, SystemSpec};
use crate::io::{FrameFeatureSequence, Manifest, SegmentMetadata, DEFAULT_FRAME_PERIOD_S};
use crate::seed::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceCount {
    Fixed(usize),
    /// Inclusive range, drawn uniformly per type.
    Range([usize; 2]),
}

impl InstanceCount {
    fn bounds(self) -> (usize, usize) {
        match self {
            Self::Fixed(n) => (n, n),
            Self::Range([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_types: usize,
    pub instances_per_type: InstanceCount,
    pub dim: usize,
    /// Mean prototype length in frames.
    pub mean_len: usize,
    /// Standard deviation of the per-frame, per-dimension Gaussian noise.
    pub within_type_noise: f64,
    /// Maximum duration change of an instance as a fraction of its prototype length.
    pub length_jitter: f64,
    pub phone_alphabet_size: usize,
    /// Inclusive phone-string length range.
    pub phones_per_word: [usize; 2],
    /// Probability that an instance's transcription has one phone substituted.
    pub phone_variation: f64,
    pub segments_per_utterance: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_types: 100,
            instances_per_type: InstanceCount::Fixed(10),
            dim: 32,
            mean_len: 25,
            within_type_noise: 0.0,
            length_jitter: 0.2,
            phone_alphabet_size: 40,
            phones_per_word: [2, 6],
            phone_variation: 0.0,
            segments_per_utterance: 10,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.instances_per_type.bounds();
        let checks = [
            (self.n_types >= 1, "n_types must be positive"),
            (lo >= 1 && lo <= hi, "instances_per_type must be a positive count or range"),
            (self.dim >= 1, "dim must be positive"),
            (self.mean_len >= 2, "mean_len must be at least 2 frames"),
            (
                self.within_type_noise >= 0.0 && self.within_type_noise.is_finite(),
                "within_type_noise must be finite and non-negative",
            ),
            (
                (0.0..1.0).contains(&self.length_jitter),
                "length_jitter must lie in [0, 1)",
            ),
            (self.phone_alphabet_size >= 1, "phone_alphabet_size must be positive"),
            (
                self.phones_per_word[0] >= 1 && self.phones_per_word[0] <= self.phones_per_word[1],
                "phones_per_word must be a positive range",
            ),
            (
                (0.0..=1.0).contains(&self.phone_variation),
                "phone_variation must lie in [0, 1]",
            ),
            (self.segments_per_utterance >= 1, "segments_per_utterance must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(LexiconError::Argument((*msg).to_string())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: Manifest,
    pub features: Vec<FrameFeatureSequence>,
}

struct Instance {
    word: usize,
    frames: Array2<f32>,
    phones: Vec<String>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = crate::transform::unit_vector(&v) {
            return u;
        }
    }
}

fn phone_name(i: usize) -> String {
    format!("p{i:02}")
}

fn generate_type(config: &SynthConfig, word: usize, rng: &mut ChaCha8Rng) -> Vec<Instance> {
    let mean = config.mean_len as f64;
    let len_lo = ((0.75 * mean).ceil() as usize).max(2);
    let len_hi = ((1.25 * mean).floor() as usize).max(len_lo);
    let len = rng.random_range(len_lo..=len_hi);
    let n_states = (len / 4).max(1);
    let states: Vec<Vec<f32>> = (0..n_states).map(|_| random_unit(rng, config.dim)).collect();
    let mut durations = vec![2usize; n_states];
    for _ in 0..len - 2 * n_states {
        durations[rng.random_range(0..n_states)] += 1;
    }
    let n_phones = rng.random_range(config.phones_per_word[0]..=config.phones_per_word[1]);
    let phones: Vec<usize> = (0..n_phones)
        .map(|_| rng.random_range(0..config.phone_alphabet_size))
        .collect();
    let (lo, hi) = config.instances_per_type.bounds();
    let count = rng.random_range(lo..=hi);
    let noise = (config.within_type_noise > 0.0)
        .then(|| Normal::new(0.0, config.within_type_noise).expect("validated sigma"));

    (0..count)
        .map(|_| {
            let mut dur = durations.clone();
            let span = (config.length_jitter * len as f64).floor() as i64;
            let change = if span > 0 { rng.random_range(-span..=span) } else { 0 };
            for _ in 0..change.unsigned_abs() {
                if change > 0 {
                    dur[rng.random_range(0..n_states)] += 1;
                } else {
                    let shrinkable: Vec<usize> = (0..n_states).filter(|&s| dur[s] > 1).collect();
                    let Some(&s) = shrinkable.choose(rng) else { break };
                    dur[s] -= 1;
                }
            }
            let total: usize = dur.iter().sum();
            let mut frames = Array2::<f32>::zeros((total, config.dim));
            let mut t = 0;
            for (s, &d) in dur.iter().enumerate() {
                for _ in 0..d {
                    for (j, dst) in frames.row_mut(t).iter_mut().enumerate() {
                        let eps: f64 = noise.as_ref().map_or(0.0, |n| n.sample(rng));
                        *dst = (f64::from(states[s][j]) + eps) as f32;
                    }
                    t += 1;
                }
            }
            let mut inst_phones: Vec<String> = phones.iter().map(|&p| phone_name(p)).collect();
            if config.phone_alphabet_size > 1 && rng.random::<f64>() < config.phone_variation {
                let pos = rng.random_range(0..inst_phones.len());
                let current = phones[pos];
                let mut other = rng.random_range(0..config.phone_alphabet_size - 1);
                if other >= current {
                    other += 1;
                }
                inst_phones[pos] = phone_name(other);
            }
            Instance {
                word,
                frames,
                phones: inst_phones,
            }
        })
        .collect()
}

/// Generates a labeled corpus. Segments are shuffled, then grouped into
/// utterances of consecutive segments.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let seeds = SeedStream::new(config.seed);
    let types = seeds.child("types");
    let per_type: Vec<Vec<Instance>> = (0..config.n_types)
        .into_par_iter()
        .map(|w| generate_type(config, w, &mut types.rng(&w.to_string())))
        .collect();
    let mut instances: Vec<Instance> = per_type.into_iter().flatten().collect();
    instances.shuffle(&mut seeds.rng("order"));

    let width = config.n_types.to_string().len();
    let mut segments = Vec::with_capacity(instances.len());
    let mut features = Vec::with_capacity(instances.len());
    let mut offset = 0.0;
    for (i, inst) in instances.into_iter().enumerate() {
        let utt = i / config.segments_per_utterance;
        if i % config.segments_per_utterance == 0 {
            offset = 0.0;
        }
        let duration = inst.frames.nrows() as f64 * DEFAULT_FRAME_PERIOD_S;
        let segment_id = format!("seg{i:06}");
        segments.push(SegmentMetadata {
            segment_id: segment_id.clone(),
            utterance_id: format!("utt{utt:05}"),
            speaker_id: format!("spk{:02}", utt % 8),
            start_s: offset,
            end_s: offset + duration,
            word_label: Some(format!("w{:0width$}", inst.word)),
            phones: Some(inst.phones),
        });
        offset += duration;
        features.push(FrameFeatureSequence::new(segment_id, inst.frames)?);
    }
    Ok(SynthCorpus {
        manifest: Manifest::new(segments)?,
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub mean_purity: f64,
    pub mean_v_measure: f64,
    /// One report per seed, in seed order.
    pub reports: Vec<EvalReport>,
    /// Reports after replacing the representations with perfect ones.
    pub perfect_reports: Vec<EvalReport>,
}

/// Runs `spec` on corpora generated at every noise level and seed. Each row also
/// reruns the system on perfect embeddings of the same corpus.
pub fn sweep_noise(
    config: &SynthConfig,
    sigmas: &[f64],
    seeds: &[u64],
    spec: &SystemSpec,
    prep: &PrepConfig,
) -> Result<Vec<NoiseRow>> {
    if seeds.is_empty() {
        return Err(LexiconError::Argument("noise sweep needs at least one seed".into()));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let mut reports = Vec::with_capacity(seeds.len());
            let mut perfect_reports = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let corpus = generate(&SynthConfig {
                    within_type_noise: sigma,
                    seed,
                    ..config.clone()
                })?;
                let data: Dataset = prepare(corpus.manifest, corpus.features, prep, spec.needs_units())?;
                reports.push(run_system(spec, &data)?.report);
                let ideal = perfect_representations(&data, PerfectMode::Embedding, prep.perfect_sigma, seed)?;
                perfect_reports.push(run_system(spec, &ideal)?.report);
            }
            let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
            Ok(NoiseRow {
                sigma,
                mean_purity: mean(|r| r.purity),
                mean_v_measure: mean(|r| r.v_measure),
                reports,
                perfect_reports,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{dtw_distance, normalized_edit_distance};

    fn small(seed: u64, sigma: f64) -> SynthConfig {
        SynthConfig {
            n_types: 6,
            instances_per_type: InstanceCount::Range([2, 5]),
            dim: 8,
            mean_len: 12,
            within_type_noise: sigma,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate(&small(3, 0.1)).unwrap();
        let b = generate(&small(3, 0.1)).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.features, b.features);
        let c = generate(&small(4, 0.1)).unwrap();
        assert_ne!(a.features[0].frames, c.features[0].frames);
    }

    #[test]
    fn noiseless_instances_align_perfectly_within_type_only() {
        let corpus = generate(&small(1, 0.0)).unwrap();
        let labels = corpus.manifest.word_labels().unwrap();
        let f = &corpus.features;
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                let d = dtw_distance(&f[i], &f[j]).unwrap();
                if labels[i] == labels[j] {
                    assert!(d < 1e-6, "same type at distance {d}");
                } else {
                    assert!(d > 1e-3, "different types at distance {d}");
                }
            }
        }
    }

    #[test]
    fn no_jitter_and_no_noise_copies_the_prototype() {
        let corpus = generate(&SynthConfig {
            length_jitter: 0.0,
            ..small(2, 0.0)
        })
        .unwrap();
        let labels = corpus.manifest.word_labels().unwrap();
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == labels[j] {
                    assert_eq!(corpus.features[i].frames, corpus.features[j].frames);
                }
            }
        }
    }

    #[test]
    fn phones_are_shared_within_type_unless_varied() {
        let corpus = generate(&small(5, 0.0)).unwrap();
        let segs = corpus.manifest.segments();
        for a in segs {
            for b in segs {
                if a.word_label == b.word_label {
                    assert_eq!(a.phones, b.phones);
                }
            }
        }
        let varied = generate(&SynthConfig {
            phone_variation: 1.0,
            ..small(5, 0.0)
        })
        .unwrap();
        let phones = varied.manifest.phones().unwrap();
        // every instance differs from the shared transcription in exactly one phone
        for (v, s) in phones.iter().zip(segs) {
            let original = &corpus.manifest.segments()[corpus.manifest.position(&s.segment_id).unwrap()];
            let d = normalized_edit_distance(v, original.phones.as_ref().unwrap());
            assert!(d > 0.0 && d <= 0.5);
        }
    }

    #[test]
    fn manifest_times_match_frame_counts() {
        let corpus = generate(&small(6, 0.0)).unwrap();
        for (seg, f) in corpus.manifest.segments().iter().zip(&corpus.features) {
            assert!((seg.duration_s() - f.len() as f64 * 0.02).abs() < 1e-9);
            assert_eq!(seg.segment_id, f.segment_id);
        }
        let counts: usize = corpus.features.len();
        assert!((12..=30).contains(&counts));
    }

    #[test]
    fn rejects_invalid_configs() {
        for bad in [
            SynthConfig { n_types: 0, ..SynthConfig::default() },
            SynthConfig { within_type_noise: -1.0, ..SynthConfig::default() },
            SynthConfig { mean_len: 1, ..SynthConfig::default() },
            SynthConfig { instances_per_type: InstanceCount::Range([3, 2]), ..SynthConfig::default() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }

    #[test]
    fn config_parses_from_partial_json() {
        let c: SynthConfig = serde_json::from_str(r#"{"n_types": 3, "instances_per_type": [2, 4]}"#).unwrap();
        assert_eq!(c.instances_per_type, InstanceCount::Range([2, 4]));
        assert_eq!(c.dim, 32);
        assert!(serde_json::from_str::<SynthConfig>(r#"{"typo": 1}"#).is_err());
    }
}
