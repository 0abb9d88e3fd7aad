//! Run configuration: one JSON document per command, strict about unknown
//! keys, with command-line flags taking precedence over file values.

use etf_longtail::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub fn load<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required key: {key}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub num_classes: Option<usize>,
    pub feature_dim: Option<usize>,
    pub head_count: Option<u64>,
    pub imbalance: Option<f64>,
    #[serde(default)]
    pub mean_norm_base: Option<f64>,
    #[serde(default)]
    pub norm_multipliers: Option<Vec<f64>>,
    #[serde(default)]
    pub spread_scale: Option<f64>,
    #[serde(default)]
    pub test_per_class: Option<u64>,
    #[serde(default)]
    pub validation_per_class: Option<u64>,
    #[serde(default)]
    pub train_jitter: Option<f64>,
    #[serde(default)]
    pub file_format: Option<FileFormat>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub many_min: Option<u64>,
    #[serde(default)]
    pub medium_min: Option<u64>,
}

impl ThresholdConfig {
    pub fn resolve(&self) -> Result<etf_longtail::evaluation::GroupThresholds> {
        use etf_longtail::evaluation::GroupThresholds;
        match (&self.preset, self.many_min, self.medium_min) {
            (Some(p), None, None) => match p.as_str() {
                "cifar100lt" => Ok(GroupThresholds::cifar100lt()),
                "cifar10lt" => Ok(GroupThresholds::cifar10lt()),
                other => Err(Error::Config(format!(
                    "unknown threshold preset '{other}' (cifar100lt, cifar10lt)"
                ))),
            },
            (None, Some(many), Some(med)) => GroupThresholds::new(many, med),
            (None, None, None) => Ok(GroupThresholds::default()),
            _ => Err(Error::Config(
                "thresholds: give either a preset or both many_min and medium_min".into(),
            )),
        }
    }
}

fn default_thresholds() -> ThresholdConfig {
    ThresholdConfig { preset: None, many_min: None, medium_min: None }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub test_path: Option<PathBuf>,
    #[serde(default)]
    pub stats_path: Option<PathBuf>,
    #[serde(default)]
    pub train_path: Option<PathBuf>,
    pub method: Option<String>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub ala_feature_norm: Option<f64>,
    #[serde(default = "default_thresholds")]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        default_thresholds()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    /// "k100" or "k10": long-tailed counts (n1 = 500, rho = 100) with equal
    /// norms 10 and feature norm 10.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub stats_path: Option<PathBuf>,
    #[serde(default)]
    pub counts: Option<Vec<u64>>,
    #[serde(default)]
    pub mean_norms: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma_1v1: Option<f64>,
    #[serde(default)]
    pub gamma_mla: Option<f64>,
    /// Defaults to the tangent-matched constant (psi/4) sin(psi/2).
    #[serde(default)]
    pub gamma_ala: Option<f64>,
    /// Defaults to the mean of the per-class mean-feature norms.
    #[serde(default)]
    pub feature_norm: Option<f64>,
    #[serde(default)]
    pub mla_form: Option<etf_longtail::evaluation::MlaBoundaryForm>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !self.step.is_finite() || self.step <= 0.0 || self.stop < self.start {
            return Err(Error::Config("grid needs step > 0 and stop >= start".into()));
        }
        let n = ((self.stop - self.start) / self.step).round() as usize;
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Either a synthetic scenario...
    #[serde(default)]
    pub scenario: Option<SimulateConfig>,
    /// ...or ingested data.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default)]
    pub stats_path: Option<PathBuf>,
    #[serde(default)]
    pub train_path: Option<PathBuf>,
    pub method: Option<String>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_thresholds")]
    pub thresholds: ThresholdConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub complexity: Option<ComplexityConfig>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub relu: Option<ReluConfig>,
    #[serde(default)]
    pub star: Option<StarConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityConfig {
    pub rank_r: u32,
    pub spectral_norm_w1: f64,
    pub bound_b: f64,
    pub mean_complexity_c: f64,
    pub n_k: u64,
    pub mean_norm: f64,
}

impl ComplexityConfig {
    pub fn build(&self) -> Result<etf_longtail::bounds::ComplexityParams> {
        etf_longtail::bounds::ComplexityParams::new(
            self.rank_r,
            self.spectral_norm_w1,
            self.bound_b,
            self.mean_complexity_c,
            self.n_k,
            self.mean_norm,
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReluConfig {
    pub depth_q: u32,
    pub frobenius_product_m: f64,
    pub input_sup_norm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarConfig {
    #[serde(default)]
    pub stats_path: Option<PathBuf>,
    #[serde(default)]
    pub counts: Option<Vec<u64>>,
    #[serde(default)]
    pub mean_norms: Option<Vec<f64>>,
    pub gamma: f64,
}
