//! Experiment pipeline: dataset assembly, training with per-epoch
//! activation tracking, evaluation, and sweeps.
//!
//! Randomness is partitioned by stage (generation, split, corruption,
//! solver), so changing the noise level cannot silently reshuffle the
//! train/test split.

use air_core::data::{self, BlobSpec};
use air_core::loss::scores;
use air_core::metrics::{self, ActivationReport, MapAxis, MapResult, PrAtN};
use air_core::noise::{confusion_from_noise_level, corrupt_labels, flip_uniform, ConfusionMatrix};
use air_core::rng::{rng_stream, streams};
use air_core::sadmm::EpochRecord;
use air_core::{AirError, Dataset, GroupOperator, Labels, Weights};
use serde::Serialize;

use crate::config::{DatasetConfig, ExperimentConfig, NoiseConfig, SolverConfig, SweepAxis};
use crate::error::CliError;

/// The dataset a run trains and evaluates on. Corruption applies to the
/// training split only; the test split keeps its original labels.
pub struct Prepared {
    pub train: Dataset,
    pub test: Option<Dataset>,
    /// Labels changed by the corruption stage.
    pub corrupted: usize,
}

pub fn build_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared, CliError> {
    let base = load_base(&cfg.dataset, seed)?;
    let fraction = cfg.dataset.test_fraction();
    let (train, test) = if fraction > 0.0 {
        let mut rng = rng_stream(seed, streams::SPLIT);
        let (train, test) =
            data::split(&base, fraction, &mut rng).map_err(CliError::from_config_error)?;
        (train, Some(test))
    } else {
        (base, None)
    };
    let (train, corrupted) = apply_noise(train, &cfg.noise, seed)?;
    Ok(Prepared {
        train,
        test,
        corrupted,
    })
}

fn load_base(dataset: &DatasetConfig, seed: u64) -> Result<Dataset, CliError> {
    match dataset {
        DatasetConfig::Blobs(b) => {
            let spec = BlobSpec {
                num_examples: b.num_examples,
                feature_dim: b.feature_dim,
                num_classes: b.num_classes,
                separation: b.separation,
                stddev: b.stddev,
            };
            let mut rng = rng_stream(seed, streams::BLOBS);
            data::generate_blobs(&spec, &mut rng).map_err(CliError::from_config_error)
        }
        DatasetConfig::Idx(i) => {
            let ds = data::load_idx(&i.images, &i.labels).map_err(CliError::from_config_error)?;
            if i.limit > 0 && i.limit < ds.num_examples() {
                let keep: Vec<usize> = (0..i.limit).collect();
                return ds.subset(&keep).map_err(CliError::from_config_error);
            }
            Ok(ds)
        }
        DatasetConfig::Features(f) => data::load_features(&f.features, &f.labels, f.format)
            .map_err(CliError::from_config_error),
    }
}

/// Applies the configured corruption, attaching the clean mask and the
/// original labels as provenance. Returns the number of changed labels.
pub fn apply_noise(
    dataset: Dataset,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(Dataset, usize), CliError> {
    let matrix = match noise {
        NoiseConfig::None => return Ok((dataset, 0)),
        NoiseConfig::Confusion { level, convention } => Some(
            confusion_from_noise_level(dataset.num_classes(), *level, *convention)
                .map_err(CliError::from_config_error)?,
        ),
        NoiseConfig::Matrix { path } => {
            let m = read_confusion_tsv(path)?;
            if m.num_classes() != dataset.num_classes() {
                return Err(CliError::config(format!(
                    "noise.path: confusion matrix is {}-class, dataset has {} classes",
                    m.num_classes(),
                    dataset.num_classes()
                )));
            }
            Some(m)
        }
        NoiseConfig::Flip { .. } => None,
    };

    let originals = dataset
        .labels()
        .as_single()
        .map_err(|_| CliError::config("label noise requires single-label data"))?
        .to_vec();
    let mut rng = rng_stream(seed, streams::NOISE);
    let (noisy, mask) = match (matrix, noise) {
        (Some(q), _) => corrupt_labels(&originals, &q, &mut rng)?,
        (None, NoiseConfig::Flip { fraction }) => {
            flip_uniform(&originals, *fraction, dataset.num_classes(), &mut rng)?
        }
        _ => unreachable!("non-flip kinds build a matrix"),
    };
    let corrupted = mask.iter().filter(|&&c| !c).count();
    let relabeled = dataset
        .with_labels(Labels::Single(noisy))?
        .with_corruption(mask, Labels::Single(originals))?;
    Ok((relabeled, corrupted))
}

fn read_confusion_tsv(path: &std::path::Path) -> Result<ConfusionMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(format!("noise.path: cannot read {}: {e}", path.display()))
    })?;
    ConfusionMatrix::from_tsv(&text).map_err(CliError::from_config_error)
}

/// The confusion matrix a noise config denotes, if it denotes one.
pub fn noise_matrix(
    noise: &NoiseConfig,
    num_classes: usize,
) -> Result<Option<ConfusionMatrix>, CliError> {
    match noise {
        NoiseConfig::Confusion { level, convention } => {
            confusion_from_noise_level(num_classes, *level, *convention)
                .map(Some)
                .map_err(CliError::from_config_error)
        }
        NoiseConfig::Matrix { path } => read_confusion_tsv(path).map(Some),
        NoiseConfig::None | NoiseConfig::Flip { .. } => Ok(None),
    }
}

/// Per-step training log line. SADMM steps carry a residual and penalty
/// parameter, SGD steps a learning rate; unused fields are omitted.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepLine {
    pub k: usize,
    pub objective_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

pub struct TrainedRun {
    pub weights: Weights,
    pub steps: Vec<StepLine>,
    pub epochs: Vec<EpochRecord>,
    /// Per-epoch activation statistics over the training split; present
    /// when a clean mask exists and the report is enabled.
    pub activation: Option<ActivationReport>,
}

/// Trains the configured solver on the prepared training split.
pub fn run_training(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    seed: u64,
) -> Result<TrainedRun, CliError> {
    let train = &prepared.train;
    let want_activations = cfg.metrics.activation_report && train.clean_mask().is_some();
    // Activations always come from the complete operator so that runs with
    // subsampled or absent group penalties stay comparable.
    let probe_op = if want_activations {
        Some(GroupOperator::from_dataset(train, cfg.weight_rule())?)
    } else {
        None
    };

    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut probe_error: Option<AirError> = None;
    let mut observe = |model: &Weights| {
        if let Some(op) = &probe_op {
            if probe_error.is_some() {
                return;
            }
            match metrics::example_activations(op, model, train.labels()) {
                Ok(values) => series.push(values),
                Err(e) => probe_error = Some(e),
            }
        }
    };

    let (weights, steps, epochs) = match &cfg.solver {
        SolverConfig::AirSadmm(_) => {
            let core = cfg.sadmm_config(seed);
            let outcome =
                air_core::sadmm::train_with_observer(train, &core, |view| observe(view.model))?;
            let steps = outcome
                .history
                .steps
                .iter()
                .map(|s| StepLine {
                    k: s.k,
                    objective_estimate: s.objective_estimate,
                    primal_residual: Some(s.primal_residual),
                    rho: Some(s.rho),
                    learning_rate: None,
                })
                .collect();
            (outcome.weights, steps, outcome.history.epochs)
        }
        SolverConfig::AirSgd(_) | SolverConfig::L2Sgd(_) | SolverConfig::HingeSgd(_) => {
            let core = cfg.sgd_config(seed);
            let outcome =
                air_core::sgd::train_with_observer(train, &core, |view| observe(view.model))?;
            let steps = outcome
                .steps
                .iter()
                .map(|s| StepLine {
                    k: s.k,
                    objective_estimate: s.objective_estimate,
                    primal_residual: None,
                    rho: None,
                    learning_rate: Some(s.learning_rate),
                })
                .collect();
            (outcome.weights, steps, outcome.epochs)
        }
    };
    if let Some(e) = probe_error {
        return Err(e.into());
    }

    let activation = match (series.is_empty(), train.clean_mask()) {
        (false, Some(mask)) => Some(metrics::activation_report(&series, mask)?),
        _ => None,
    };

    Ok(TrainedRun {
        weights,
        steps,
        epochs,
        activation,
    })
}

/// Ranking metrics of one split under a fixed model.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub examples: usize,
    /// Argmax accuracy; absent for multi-label data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub precision_at: Vec<PrAtN>,
    pub map_per_label: MapResult,
    pub map_per_image: MapResult,
}

pub fn split_report(
    w: &Weights,
    dataset: &Dataset,
    top_n: &[usize],
) -> Result<SplitReport, CliError> {
    let s = scores(w, &dataset.features().view())?;
    let accuracy = if dataset.labels().is_single() {
        Some(metrics::accuracy(w, dataset)?)
    } else {
        None
    };
    let mut precision_at = Vec::with_capacity(top_n.len());
    for &n in top_n {
        precision_at.push(metrics::precision_recall_at_n(&s, dataset.labels(), n)?);
    }
    Ok(SplitReport {
        examples: dataset.num_examples(),
        accuracy,
        precision_at,
        map_per_label: metrics::mean_average_precision(&s, dataset.labels(), MapAxis::PerLabel)?,
        map_per_image: metrics::mean_average_precision(&s, dataset.labels(), MapAxis::PerImage)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSummary {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Training labels actually changed.
    pub corrupted: usize,
}

impl NoiseSummary {
    pub fn new(noise: &NoiseConfig, corrupted: usize) -> Self {
        let (kind, level) = match noise {
            NoiseConfig::None => ("none", None),
            NoiseConfig::Confusion { level, .. } => ("confusion", Some(*level)),
            NoiseConfig::Flip { fraction } => ("flip", Some(*fraction)),
            NoiseConfig::Matrix { .. } => ("matrix", None),
        };
        NoiseSummary {
            kind: kind.to_string(),
            level,
            corrupted,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ActivationSummary {
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_auc: Option<f64>,
    pub last_gap: f64,
}

impl ActivationSummary {
    pub fn new(report: &ActivationReport) -> Self {
        let first = report.per_epoch.first();
        let last = report.per_epoch.last();
        ActivationSummary {
            epochs: report.per_epoch.len(),
            first_auc: first.and_then(|e| e.auc),
            last_auc: last.and_then(|e| e.auc),
            last_gap: last.map(|e| e.gap).unwrap_or(0.0),
        }
    }
}

/// Everything `metrics.json` holds for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub solver: String,
    pub seed: u64,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub noise: NoiseSummary,
    pub epochs_run: usize,
    /// Training objective of the final model (the solver's own objective).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    /// Metrics against the labels the solver saw (possibly corrupted).
    pub train: SplitReport,
    /// Training accuracy against the original labels, when corruption
    /// provenance is available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_accuracy_true_labels: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<SplitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationSummary>,
}

pub fn summarize(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    seed: u64,
    weights: &Weights,
    epochs: &[EpochRecord],
    activation: Option<&ActivationReport>,
) -> Result<RunSummary, CliError> {
    let train = &prepared.train;
    let train_report = split_report(weights, train, &cfg.metrics.top_n)?;
    let test_report = prepared
        .test
        .as_ref()
        .map(|t| split_report(weights, t, &cfg.metrics.top_n))
        .transpose()?;
    let train_accuracy_true_labels = match (train.true_labels(), train.labels().is_single()) {
        (Some(truth), true) => {
            let restored = train.with_labels(truth.clone())?;
            Some(metrics::accuracy(weights, &restored)?)
        }
        _ => None,
    };
    let is_sadmm = matches!(cfg.solver, SolverConfig::AirSadmm(_));
    Ok(RunSummary {
        solver: cfg.solver_name().to_string(),
        seed,
        feature_dim: train.feature_dim(),
        num_classes: train.num_classes(),
        train_examples: train.num_examples(),
        test_examples: prepared.test.as_ref().map_or(0, |t| t.num_examples()),
        noise: NoiseSummary::new(&cfg.noise, prepared.corrupted),
        epochs_run: epochs.len(),
        final_objective: epochs.last().map(|e| e.objective),
        final_residual: if is_sadmm {
            epochs.last().map(|e| e.residual)
        } else {
            None
        },
        train: train_report,
        train_accuracy_true_labels,
        test: test_report,
        activation: activation.map(ActivationSummary::new),
    })
}

/// A single-model activation report: one "epoch" of statistics plus the
/// ranking. Examples without a clean mask count as clean.
pub fn activation_snapshot(
    dataset: &Dataset,
    w: &Weights,
    rule: air_core::WeightRule,
) -> Result<ActivationReport, CliError> {
    let op = GroupOperator::from_dataset(dataset, rule)?;
    let values = metrics::example_activations(&op, w, dataset.labels())?;
    let all_clean;
    let mask = match dataset.clean_mask() {
        Some(m) => m,
        None => {
            all_clean = vec![true; dataset.num_examples()];
            &all_clean
        }
    };
    let series = vec![values];
    Ok(metrics::activation_report(&series, mask)?)
}

/// One sweep grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: f64,
    pub seed: u64,
    pub solver: String,
    pub epochs_run: usize,
    pub final_objective: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub activation_gap: Option<f64>,
    pub activation_auc: Option<f64>,
}

pub fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::NoiseLevel => "noise-level",
        SweepAxis::GroupFraction => "group-fraction",
    }
}

/// Applies one sweep point to a copy of the config.
pub fn sweep_point(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    value: f64,
) -> Result<ExperimentConfig, CliError> {
    let mut point = cfg.clone();
    match axis {
        SweepAxis::NoiseLevel => {
            point.noise = match &cfg.noise {
                NoiseConfig::Flip { .. } => NoiseConfig::Flip { fraction: value },
                NoiseConfig::Confusion { convention, .. } => NoiseConfig::Confusion {
                    level: value,
                    convention: *convention,
                },
                NoiseConfig::None => NoiseConfig::Confusion {
                    level: value,
                    convention: air_core::noise::NoiseConvention::KeepProb,
                },
                NoiseConfig::Matrix { .. } => {
                    return Err(CliError::config(
                        "sweep.axis = \"noise-level\" cannot rescale a matrix noise source",
                    ))
                }
            };
        }
        SweepAxis::GroupFraction => {
            point.regularizer.subsample_fraction = value;
        }
    }
    point.validate()?;
    Ok(point)
}

/// Runs the whole sweep grid. Each cell trains from scratch; rows come out
/// in grid order (values outer, seeds inner).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep requires a [sweep] section"))?
        .clone();
    let mut rows = Vec::with_capacity(sweep.values.len() * sweep.seeds.len());
    for &value in &sweep.values {
        let point = sweep_point(cfg, sweep.axis, value)?;
        for &seed in &sweep.seeds {
            let prepared = build_dataset(&point, seed)?;
            let run = run_training(&point, &prepared, seed)?;
            let summary = summarize(
                &point,
                &prepared,
                seed,
                &run.weights,
                &run.epochs,
                run.activation.as_ref(),
            )?;
            log::info!(
                "sweep {}={} seed={}: train acc {:?}, test acc {:?}",
                axis_name(sweep.axis),
                value,
                seed,
                summary.train.accuracy,
                summary.test.as_ref().and_then(|t| t.accuracy)
            );
            rows.push(SweepRow {
                axis: axis_name(sweep.axis),
                value,
                seed,
                solver: summary.solver.clone(),
                epochs_run: summary.epochs_run,
                final_objective: summary.final_objective,
                train_accuracy: summary.train.accuracy,
                test_accuracy: summary.test.as_ref().and_then(|t| t.accuracy),
                // The gap only means something when both sides exist, which
                // is exactly when the AUC exists.
                activation_gap: summary
                    .activation
                    .and_then(|a| a.last_auc.map(|_| a.last_gap)),
                activation_auc: summary.activation.and_then(|a| a.last_auc),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    use std::fmt::Write as _;
    let mut csv = String::from(
        "axis,value,seed,solver,epochs_run,final_objective,train_accuracy,test_accuracy,activation_gap,activation_auc\n",
    );
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.seed,
            r.solver,
            r.epochs_run,
            crate::artifacts::OptCell(r.final_objective),
            crate::artifacts::OptCell(r.train_accuracy),
            crate::artifacts::OptCell(r.test_accuracy),
            crate::artifacts::OptCell(r.activation_gap),
            crate::artifacts::OptCell(r.activation_auc),
        );
    }
    csv
}
