//! TOML experiment configuration.
//!
//! A config file fully determines a run: dataset source, label corruption,
//! solver, regularizer strengths, and the metrics to report. Every field
//! except `seed` and the dataset source has a default, and the resolved
//! values (after CLI overrides) are written back out as
//! `resolved_config.toml` so a run can be replayed from its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use air_core::data::FeatureFormat;
use air_core::loss::LossKind;
use air_core::noise::NoiseConvention;
use air_core::sadmm::{RidgeMode, SadmmConfig};
use air_core::sgd::{SgdConfig, SgdObjective};
use air_core::WeightRule;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stage derives its own stream from it.
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub regularizer: RegConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetConfig {
    /// Synthetic Gaussian blobs around random class centers.
    Blobs(BlobsSection),
    /// Big-endian IDX image and label files.
    Idx(IdxSection),
    /// This crate's own feature formats, binary or CSV.
    Features(FeaturesSection),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlobsSection {
    pub num_examples: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_stddev")]
    pub stddev: f64,
    #[serde(default = "default_blob_test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdxSection {
    pub images: PathBuf,
    pub labels: PathBuf,
    #[serde(default)]
    pub test_fraction: f64,
    /// Keep only the first `limit` examples before splitting; 0 keeps all.
    #[serde(default)]
    pub limit: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeaturesSection {
    pub features: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_feature_format")]
    pub format: FeatureFormat,
    #[serde(default)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseConfig {
    /// Labels are used as-is.
    #[default]
    None,
    /// Uniform confusion matrix at a scalar noise level.
    Confusion {
        level: f64,
        #[serde(default = "default_convention")]
        convention: NoiseConvention,
    },
    /// Flip an exact fraction of labels to random other classes.
    Flip { fraction: f64 },
    /// Row-stochastic confusion matrix read from a TSV file.
    Matrix { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverConfig {
    /// Stochastic ADMM on the group-regularized objective.
    AirSadmm(SadmmSection),
    /// Subgradient SGD on the same objective.
    AirSgd(SgdSection),
    /// Plain L2 softmax baseline.
    L2Sgd(SgdSection),
    /// Plain L2 one-vs-rest hinge baseline.
    HingeSgd(SgdSection),
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::AirSadmm(SadmmSection::default())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SadmmSection {
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_rho0")]
    pub rho0: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_ridge_mode")]
    pub ridge_mode: RidgeMode,
    #[serde(default = "default_true")]
    pub scale_gradients: bool,
}

impl Default for SadmmSection {
    fn default() -> Self {
        let base = SadmmConfig::default();
        SadmmSection {
            loss: base.loss,
            epochs: base.epochs,
            batch_size: base.batch_size,
            rho0: base.rho0,
            beta: base.beta,
            rho_max: base.rho_max,
            tolerance: base.tolerance,
            ridge_mode: base.ridge_mode,
            scale_gradients: base.scale_gradients,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdSection {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Iterations until the rate halves; omitted means a constant rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_iters: Option<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub scale_gradients: bool,
}

impl Default for SgdSection {
    fn default() -> Self {
        SgdSection {
            learning_rate: default_learning_rate(),
            decay_iters: None,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            scale_gradients: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegConfig {
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    /// Fixed per-group weight; omitted means size-normalized weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_g: Option<f64>,
    #[serde(default = "default_one")]
    pub subsample_fraction: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            lambda1: default_lambda1(),
            lambda_g: None,
            subsample_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Cutoffs for precision/recall at N.
    #[serde(default = "default_top_n")]
    pub top_n: Vec<usize>,
    /// Track per-epoch activation statistics split by clean mask.
    #[serde(default = "default_true")]
    pub activation_report: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            top_n: default_top_n(),
            activation_report: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Vary the confusion noise level on the training labels.
    NoiseLevel,
    /// Vary the fraction of groups kept in the regularizer.
    GroupFraction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default = "default_sweep_seeds")]
    pub seeds: Vec<u64>,
}

fn default_separation() -> f64 {
    3.0
}

fn default_stddev() -> f64 {
    1.0
}

fn default_blob_test_fraction() -> f64 {
    0.2
}

fn default_feature_format() -> FeatureFormat {
    FeatureFormat::Binary
}

fn default_convention() -> NoiseConvention {
    NoiseConvention::KeepProb
}

fn default_loss() -> LossKind {
    LossKind::Softmax
}

fn default_epochs() -> usize {
    SadmmConfig::default().epochs
}

fn default_batch_size() -> usize {
    SadmmConfig::default().batch_size
}

fn default_rho0() -> f64 {
    SadmmConfig::default().rho0
}

fn default_beta() -> f64 {
    SadmmConfig::default().beta
}

fn default_rho_max() -> f64 {
    SadmmConfig::default().rho_max
}

fn default_tolerance() -> f64 {
    SadmmConfig::default().tolerance
}

fn default_ridge_mode() -> RidgeMode {
    SadmmConfig::default().ridge_mode
}

fn default_learning_rate() -> f64 {
    0.05
}

fn default_lambda1() -> f64 {
    1e-4
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_top_n() -> Vec<usize> {
    vec![1, 5]
}

fn default_sweep_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dataset.validate()?;
        self.noise.validate()?;
        self.regularizer.validate()?;
        self.metrics.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        // Numeric solver fields are checked by the core configs they map to.
        match &self.solver {
            SolverConfig::AirSadmm(_) => self
                .sadmm_config(self.seed)
                .validate()
                .map_err(CliError::from_config_error)?,
            SolverConfig::AirSgd(_) | SolverConfig::L2Sgd(_) | SolverConfig::HingeSgd(_) => self
                .sgd_config(self.seed)
                .validate()
                .map_err(CliError::from_config_error)?,
        }
        Ok(())
    }

    pub fn weight_rule(&self) -> WeightRule {
        match self.regularizer.lambda_g {
            Some(value) => WeightRule::Fixed(value),
            None => WeightRule::SizeNormalized,
        }
    }

    /// The core SADMM config this experiment maps to. Valid whenever the
    /// solver kind is `air-sadmm`; other kinds get the section defaults.
    pub fn sadmm_config(&self, seed: u64) -> SadmmConfig {
        let section = match &self.solver {
            SolverConfig::AirSadmm(s) => s.clone(),
            _ => SadmmSection::default(),
        };
        SadmmConfig {
            loss: section.loss,
            lambda1: self.regularizer.lambda1,
            weight_rule: self.weight_rule(),
            subsample_fraction: self.regularizer.subsample_fraction,
            rho0: section.rho0,
            beta: section.beta,
            rho_max: section.rho_max,
            batch_size: section.batch_size,
            epochs: section.epochs,
            tolerance: section.tolerance,
            ridge_mode: section.ridge_mode,
            scale_gradients: section.scale_gradients,
            seed,
        }
    }

    /// The core SGD config for the three SGD solver kinds.
    pub fn sgd_config(&self, seed: u64) -> SgdConfig {
        let (section, objective) = match &self.solver {
            SolverConfig::AirSgd(s) => (s.clone(), SgdObjective::Air),
            SolverConfig::L2Sgd(s) => (s.clone(), SgdObjective::L2Softmax),
            SolverConfig::HingeSgd(s) => (s.clone(), SgdObjective::L2Hinge),
            SolverConfig::AirSadmm(_) => (SgdSection::default(), SgdObjective::L2Softmax),
        };
        SgdConfig {
            objective,
            learning_rate: section.learning_rate,
            decay_iters: section.decay_iters.unwrap_or(f64::INFINITY),
            lambda1: self.regularizer.lambda1,
            weight_rule: self.weight_rule(),
            batch_size: section.batch_size,
            epochs: section.epochs,
            scale_gradients: section.scale_gradients,
            seed,
        }
    }

    pub fn solver_name(&self) -> &'static str {
        match &self.solver {
            SolverConfig::AirSadmm(_) => "air-sadmm",
            SolverConfig::AirSgd(_) => "air-sgd",
            SolverConfig::L2Sgd(_) => "l2-sgd",
            SolverConfig::HingeSgd(_) => "hinge-sgd",
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<(), CliError> {
        let fraction = match self {
            DatasetConfig::Blobs(b) => {
                if b.num_classes < 2 {
                    return Err(CliError::config("dataset.num_classes must be at least 2"));
                }
                if b.num_examples < b.num_classes {
                    return Err(CliError::config(
                        "dataset.num_examples must cover every class",
                    ));
                }
                if b.feature_dim == 0 {
                    return Err(CliError::config("dataset.feature_dim must be at least 1"));
                }
                if !(b.separation > 0.0) || !b.separation.is_finite() {
                    return Err(CliError::config("dataset.separation must be positive"));
                }
                if !(b.stddev > 0.0) || !b.stddev.is_finite() {
                    return Err(CliError::config("dataset.stddev must be positive"));
                }
                b.test_fraction
            }
            DatasetConfig::Idx(i) => i.test_fraction,
            DatasetConfig::Features(f) => f.test_fraction,
        };
        if !(0.0..1.0).contains(&fraction) {
            return Err(CliError::config("dataset.test_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn test_fraction(&self) -> f64 {
        match self {
            DatasetConfig::Blobs(b) => b.test_fraction,
            DatasetConfig::Idx(i) => i.test_fraction,
            DatasetConfig::Features(f) => f.test_fraction,
        }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<(), CliError> {
        match self {
            NoiseConfig::None | NoiseConfig::Matrix { .. } => Ok(()),
            NoiseConfig::Confusion { level, .. } => {
                if !(0.0..=1.0).contains(level) {
                    return Err(CliError::config("noise.level must lie in [0, 1]"));
                }
                Ok(())
            }
            NoiseConfig::Flip { fraction } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(CliError::config("noise.fraction must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }
}

impl RegConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(CliError::config(
                "regularizer.lambda1 must be finite and nonnegative",
            ));
        }
        if let Some(lg) = self.lambda_g {
            if !(lg >= 0.0) || !lg.is_finite() {
                return Err(CliError::config(
                    "regularizer.lambda_g must be finite and nonnegative",
                ));
            }
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(CliError::config(
                "regularizer.subsample_fraction must lie in (0, 1]",
            ));
        }
        Ok(())
    }
}

impl MetricsConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.top_n.iter().any(|&n| n == 0) {
            return Err(CliError::config("metrics.top_n entries must be at least 1"));
        }
        Ok(())
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::config("sweep.values must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("sweep.seeds must not be empty"));
        }
        let range_ok = |v: f64| match self.axis {
            SweepAxis::NoiseLevel => (0.0..=1.0).contains(&v),
            SweepAxis::GroupFraction => v > 0.0 && v <= 1.0,
        };
        if let Some(bad) = self.values.iter().copied().find(|&v| !range_ok(v)) {
            return Err(CliError::config(format!(
                "sweep.values entry {bad} is out of range for the {} axis",
                match self.axis {
                    SweepAxis::NoiseLevel => "noise-level",
                    SweepAxis::GroupFraction => "group-fraction",
                }
            )));
        }
        Ok(())
    }
}
