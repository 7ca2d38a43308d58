//! Plain minibatch subgradient descent, both as a baseline (ridge-only
//! objectives) and as a comparison solver on the group-regularized
//! objective. The group term contributes `F^T s`, where `s_g` is the
//! subgradient `lambda_g * (F w)_g / ||(F w)_g||` (zero at zero).

use serde::{Deserialize, Serialize};

use crate::error::{AirError, Result};
use crate::exec::for_each_row;
use crate::loss::{loss_and_gradient, LossKind, MiniBatch};
use crate::objective::{air_objective, ridge_objective, ridge_penalty};
use crate::reg::group_activations;
use crate::rng::{rng_stream, streams};
use crate::sadmm::{DivergenceGuard, EpochRecord, EpochView};
use crate::tensor::{Dataset, GroupOperator, GroupedResponse, WeightRule, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SgdObjective {
    /// The full group-regularized objective; same minimand as the
    /// stochastic ADMM solver with all groups active.
    Air,
    /// Softmax loss plus ridge.
    L2Softmax,
    /// One-vs-rest hinge plus ridge.
    L2Hinge,
}

impl SgdObjective {
    pub fn loss_kind(&self) -> LossKind {
        match self {
            SgdObjective::Air | SgdObjective::L2Softmax => LossKind::Softmax,
            SgdObjective::L2Hinge => LossKind::Hinge,
        }
    }

    pub fn uses_group_penalty(&self) -> bool {
        matches!(self, SgdObjective::Air)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub objective: SgdObjective,
    pub learning_rate: f64,
    /// Iterations until the rate halves: `rate_k = lr / (1 + k / decay)`.
    /// Infinite means a constant rate.
    pub decay_iters: f64,
    pub lambda1: f64,
    pub weight_rule: WeightRule,
    pub batch_size: usize,
    pub epochs: usize,
    pub scale_gradients: bool,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            objective: SgdObjective::L2Softmax,
            learning_rate: 1e-4,
            decay_iters: f64::INFINITY,
            lambda1: 1e-4,
            weight_rule: WeightRule::SizeNormalized,
            batch_size: 64,
            epochs: 30,
            scale_gradients: true,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(AirError::invalid(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay_iters > 0.0) {
            return Err(AirError::invalid(format!(
                "decay_iters must be positive, got {}",
                self.decay_iters
            )));
        }
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(AirError::invalid(format!(
                "lambda1 must be finite and nonnegative, got {}",
                self.lambda1
            )));
        }
        if self.batch_size == 0 {
            return Err(AirError::invalid("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(AirError::invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Subgradient of the group penalty at `w`: `F^T s` with per-group radial
/// scaling. Also returns the response `F w` so callers can reuse its norms.
pub fn group_subgradient(op: &GroupOperator, w: &Weights) -> Result<(Weights, GroupedResponse)> {
    let fw = op.apply_forward(w)?;
    let p = op.feature_dim();
    let lambdas = op.lambdas();
    let mut s = fw.clone();
    for_each_row(s.as_mut_slice(), p, true, |g, row| {
        let norm = row.iter().map(|&a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scale = lambdas[g] / norm;
            for a in row.iter_mut() {
                *a *= scale;
            }
        } else {
            row.fill(0.0);
        }
    });
    let sub = op.apply_adjoint(&s)?;
    Ok((sub, fw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdRecord {
    /// Steps completed after this one.
    pub k: usize,
    /// `n/|b|` times the batch loss plus the penalties, all at the iterate
    /// the step started from.
    pub objective_estimate: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    pub weights: Weights,
    pub steps: Vec<SgdRecord>,
    pub epochs: Vec<EpochRecord>,
}

pub fn train(dataset: &Dataset, cfg: &SgdConfig) -> Result<SgdOutcome> {
    train_with_observer(dataset, cfg, |_| {})
}

pub fn train_with_observer(
    dataset: &Dataset,
    cfg: &SgdConfig,
    mut observer: impl FnMut(&EpochView<'_>),
) -> Result<SgdOutcome> {
    cfg.validate()?;
    let n = dataset.num_examples();
    if n == 0 {
        return Err(AirError::invalid("cannot train on an empty dataset"));
    }
    let loss = cfg.objective.loss_kind();
    let op = if cfg.objective.uses_group_penalty() {
        Some(GroupOperator::from_dataset(dataset, cfg.weight_rule)?)
    } else {
        None
    };

    let mut w: Weights = ndarray::Array2::zeros((dataset.feature_dim(), dataset.num_classes()));
    let mut rng = rng_stream(cfg.seed, streams::SGD);
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut guard = DivergenceGuard::new("objective estimate");
    let mut k = 0usize;

    for epoch in 0..cfg.epochs {
        for _ in 0..steps_per_epoch {
            let batch = MiniBatch::sample(n, cfg.batch_size, cfg.scale_gradients, &mut rng)?;
            let (batch_loss, mut grad) = loss_and_gradient(loss, &w, dataset, &batch)?;

            let mut estimate =
                batch_loss * (n as f64 / batch.len() as f64) + ridge_penalty(&w, cfg.lambda1);
            if let Some(op) = &op {
                let (sub, fw) = group_subgradient(op, &w)?;
                grad += &sub;
                estimate += group_activations(&fw)
                    .iter()
                    .zip(op.lambdas())
                    .map(|(&a, &l)| l * a)
                    .sum::<f64>();
            }
            guard.check(estimate, k)?;

            let rate = cfg.learning_rate / (1.0 + k as f64 / cfg.decay_iters);
            ndarray::Zip::from(&mut w).and(&grad).for_each(|wi, &gi| {
                *wi -= rate * (gi + 2.0 * cfg.lambda1 * *wi);
            });
            if !w.iter().all(|a| a.is_finite()) {
                return Err(AirError::Divergence {
                    iteration: k,
                    reason: "non-finite iterate".into(),
                });
            }
            k += 1;
            steps.push(SgdRecord {
                k,
                objective_estimate: estimate,
                learning_rate: rate,
            });
        }
        let objective = match &op {
            Some(op) => air_objective(dataset, op, &w, cfg.lambda1, loss)?,
            None => ridge_objective(dataset, &w, cfg.lambda1, loss)?,
        };
        epochs.push(EpochRecord {
            epoch,
            objective,
            residual: f64::NAN,
        });
        observer(&EpochView {
            epoch,
            model: &w,
            iterate: &w,
        });
    }

    Ok(SgdOutcome {
        weights: w,
        steps,
        epochs,
    })
}
