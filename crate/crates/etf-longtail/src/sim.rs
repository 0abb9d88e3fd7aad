//! Synthetic collapsed-feature scenarios: long-tailed count profiles, train
//! sets collapsed exactly onto the classifier rays, and test sets whose
//! angular spread per class shrinks as 1/sqrt(n_k).
//!
//! Train features for class k are exactly c_k w_k replicated n_k times; test
//! features are c_k w_k plus isotropic Gaussian noise whose expected
//! magnitude is sigma_k = s c_k / sqrt(n_k) (per-coordinate std
//! sigma_k / sqrt(d)), so the mean angular deviation of class k tracks
//! s / sqrt(n_k) in the small-angle regime. Everything is a pure function of
//! the seed; each (split, class) pair draws from its own ChaCha stream so
//! classes can be generated concurrently without changing a single byte.

use crate::adjust::ClassStats;
use crate::error::{Error, Result};
use crate::etf::EtfClassifier;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Exponential long-tail profile: n_k = round(n_1 * rho^(-(k-1)/(K-1))).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LongTailProfile {
    pub num_classes: usize,
    pub head_count: u64,
    pub imbalance: f64,
}

impl LongTailProfile {
    pub fn new(num_classes: usize, head_count: u64, imbalance: f64) -> Result<Self> {
        if num_classes < 3 {
            return Err(Error::Config(format!(
                "profile needs at least 3 classes, got {num_classes}"
            )));
        }
        if head_count < 1 {
            return Err(Error::Config("head count must be at least 1".into()));
        }
        if !imbalance.is_finite() || imbalance < 1.0 {
            return Err(Error::Config(format!(
                "imbalance factor must be >= 1, got {imbalance}"
            )));
        }
        Ok(LongTailProfile { num_classes, head_count, imbalance })
    }
}

/// Per-class counts for the profile, rounded half-up; a class rounding to
/// zero is a profile error.
pub fn make_counts(profile: &LongTailProfile) -> Result<Vec<u64>> {
    let k = profile.num_classes;
    let mut counts = Vec::with_capacity(k);
    for i in 0..k {
        let exact = profile.head_count as f64
            * profile.imbalance.powf(-(i as f64) / (k as f64 - 1.0));
        let rounded = (exact + 0.5).floor();
        if rounded < 1.0 {
            return Err(Error::Config(format!(
                "class {} count rounds to zero (exact {exact:.4}); raise the head \
                 count or lower the imbalance",
                i + 1
            )));
        }
        counts.push(rounded as u64);
    }
    debug_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    Ok(counts)
}

/// Full scenario description. `norm_multipliers`, the validation split, and
/// train jitter are optional; defaults reproduce the idealized collapsed
/// geometry.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ScenarioConfig {
    pub profile: LongTailProfile,
    pub feature_dim: usize,
    /// Base mean-feature norm c; class k uses c * multiplier_k.
    pub mean_norm_base: f64,
    #[serde(default)]
    pub norm_multipliers: Option<Vec<f64>>,
    pub spread_scale: f64,
    pub test_per_class: u64,
    #[serde(default)]
    pub validation_per_class: Option<u64>,
    /// Optional noise magnitude added to train features (default 0: exact
    /// collapse onto the weight rays).
    #[serde(default)]
    pub train_jitter: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        LongTailProfile::new(
            self.profile.num_classes,
            self.profile.head_count,
            self.profile.imbalance,
        )?;
        if self.feature_dim < self.profile.num_classes - 1 {
            return Err(Error::Config(format!(
                "feature dimension {} too small for {} classes (need d >= K-1)",
                self.feature_dim, self.profile.num_classes
            )));
        }
        if !self.mean_norm_base.is_finite() || self.mean_norm_base <= 0.0 {
            return Err(Error::Config("mean norm base must be positive".into()));
        }
        if let Some(m) = &self.norm_multipliers {
            if m.len() != self.profile.num_classes {
                return Err(Error::Config(format!(
                    "norm multipliers cover {} classes, profile has {}",
                    m.len(),
                    self.profile.num_classes
                )));
            }
            if m.iter().any(|&v| !v.is_finite() || v <= 0.0) {
                return Err(Error::Config("norm multipliers must be positive".into()));
            }
        }
        if !self.spread_scale.is_finite() || self.spread_scale <= 0.0 {
            return Err(Error::Config("spread scale must be positive".into()));
        }
        if self.test_per_class < 1 {
            return Err(Error::Config("need at least one test sample per class".into()));
        }
        if !self.train_jitter.is_finite() || self.train_jitter < 0.0 {
            return Err(Error::Config("train jitter must be >= 0".into()));
        }
        Ok(())
    }

    fn class_norm(&self, k: usize) -> f64 {
        self.mean_norm_base
            * self
                .norm_multipliers
                .as_ref()
                .map(|m| m[k])
                .unwrap_or(1.0)
    }
}

/// Which split a feature set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Train,
    Test,
}

/// Labeled d-dimensional feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: SetKind,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<u32>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() * self.feature_dim {
            return Err(Error::format("feature buffer does not match label count"));
        }
        for (i, &l) in self.labels.iter().enumerate() {
            if l as usize >= self.num_classes {
                return Err(Error::format_at(
                    format!("label {l} out of range [0, {})", self.num_classes),
                    i as u64 + 1,
                ));
            }
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::format_at(
                "non-finite feature value",
                (pos / self.feature_dim) as u64 + 1,
            ));
        }
        Ok(())
    }
}

/// Output of a full scenario draw.
#[derive(Debug, Clone)]
pub struct Generated {
    pub train: FeatureSet,
    pub test: FeatureSet,
    pub validation: Option<FeatureSet>,
    pub stats: ClassStats,
}

// Stream tags keep the train/test/validation draws disjoint per class.
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_VALIDATION: u64 = 2;

fn class_rng(seed: u64, stream_tag: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream_tag << 32) | class as u64);
    rng
}

/// Generates train and test sets plus the class statistics of the train
/// split. Identical configs produce byte-identical output regardless of
/// evaluation parallelism.
pub fn generate(
    config: &ScenarioConfig,
    etf: &EtfClassifier,
) -> Result<(FeatureSet, FeatureSet, ClassStats)> {
    let g = generate_full(config, etf)?;
    Ok((g.train, g.test, g.stats))
}

/// Like [`generate`] but also draws the optional validation split (balanced,
/// independent of test).
pub fn generate_full(config: &ScenarioConfig, etf: &EtfClassifier) -> Result<Generated> {
    config.validate()?;
    let k = config.profile.num_classes;
    let d = config.feature_dim;
    if etf.num_classes() != k || etf.feature_dim() != d {
        return Err(Error::Contract(format!(
            "classifier is {}x{}, scenario wants {}x{}",
            etf.num_classes(),
            etf.feature_dim(),
            k,
            d
        )));
    }
    let counts = make_counts(&config.profile)?;

    let train = synth_split(config, etf, &counts, SetKind::Train, STREAM_TRAIN)?;
    let test_counts = vec![config.test_per_class; k];
    let test = synth_split(config, etf, &test_counts, SetKind::Test, STREAM_TEST)?;
    let validation = match config.validation_per_class {
        Some(n) if n > 0 => {
            let val_counts = vec![n; k];
            Some(synth_split(config, etf, &val_counts, SetKind::Test, STREAM_VALIDATION)?)
        }
        _ => None,
    };

    // empirical stats of the train split
    let stats = stats_from_set(&train)?;
    Ok(Generated { train, test, validation, stats })
}

fn synth_split(
    config: &ScenarioConfig,
    etf: &EtfClassifier,
    counts: &[u64],
    kind: SetKind,
    stream_tag: u64,
) -> Result<FeatureSet> {
    let k = config.profile.num_classes;
    let d = config.feature_dim;
    let total: u64 = counts.iter().sum();
    let mut features = vec![0.0f64; total as usize * d];
    let mut labels = vec![0u32; total as usize];

    let mut offsets = Vec::with_capacity(k);
    let mut acc = 0usize;
    for &c in counts {
        offsets.push(acc);
        acc += c as usize;
    }

    let train_counts = make_counts(&config.profile)?;
    let fill_class = |class: usize, block: &mut [f64], label_block: &mut [u32]| {
        let c_k = config.class_norm(class);
        let w = etf.weight(class);
        // spread magnitude follows the *train* count even for test draws
        let sigma = match kind {
            SetKind::Train => config.train_jitter,
            SetKind::Test => {
                config.spread_scale * c_k / (train_counts[class] as f64).sqrt()
            }
        };
        let coord_scale = sigma / (d as f64).sqrt();
        let mut rng = class_rng(config.seed, stream_tag, class);
        for (row, label) in block.chunks_mut(d).zip(label_block.iter_mut()) {
            *label = class as u32;
            for (j, slot) in row.iter_mut().enumerate() {
                let noise = if coord_scale > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    coord_scale * z
                } else {
                    0.0
                };
                *slot = c_k * w[j] + noise;
            }
        }
    };

    // one disjoint block per class; rayon or serial, same bytes
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let mut feature_blocks: Vec<(usize, &mut [f64])> = Vec::with_capacity(k);
        let mut label_blocks: Vec<&mut [u32]> = Vec::with_capacity(k);
        let mut rest_f = features.as_mut_slice();
        let mut rest_l = labels.as_mut_slice();
        for (class, &c) in counts.iter().enumerate() {
            let (fb, rf) = rest_f.split_at_mut(c as usize * d);
            let (lb, rl) = rest_l.split_at_mut(c as usize);
            feature_blocks.push((class, fb));
            label_blocks.push(lb);
            rest_f = rf;
            rest_l = rl;
        }
        feature_blocks
            .into_par_iter()
            .zip(label_blocks)
            .for_each(|((class, fb), lb)| fill_class(class, fb, lb));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (class, &c) in counts.iter().enumerate() {
            let start = offsets[class];
            let frange = start * d..(start + c as usize) * d;
            let lrange = start..start + c as usize;
            fill_class(class, &mut features[frange], &mut labels[lrange]);
        }
    }
    let _ = offsets;

    Ok(FeatureSet { kind, num_classes: k, feature_dim: d, features, labels })
}

/// Class statistics (counts and empirical mean-feature norms) of a feature
/// set; errors if any class in [0, K) has no rows.
pub fn stats_from_set(set: &FeatureSet) -> Result<ClassStats> {
    let k = set.num_classes;
    let d = set.feature_dim;
    let mut counts = vec![0u64; k];
    let mut sums = vec![0.0f64; k * d];
    for (i, &label) in set.labels.iter().enumerate() {
        let c = label as usize;
        counts[c] += 1;
        let row = set.row(i);
        for j in 0..d {
            sums[c * d + j] += row[j];
        }
    }
    let mut norms = Vec::with_capacity(k);
    for c in 0..k {
        if counts[c] == 0 {
            return Err(Error::format(format!(
                "class {c} has no samples; per-class statistics are undefined"
            )));
        }
        let n = counts[c] as f64;
        let norm2: f64 = sums[c * d..(c + 1) * d].iter().map(|s| (s / n).powi(2)).sum();
        norms.push(norm2.sqrt());
    }
    ClassStats::from_integer_counts(&counts, norms)
}

/// Reads a feature file (binary or CSV, sniffed by magic) and returns the
/// parsed set together with class statistics computed from its rows.
pub fn ingest(path: &std::path::Path) -> Result<(FeatureSet, ClassStats)> {
    let set = crate::io::read_feature_file(path)?;
    let stats = stats_from_set(&set)?;
    Ok((set, stats))
}
